#pragma once

// Sum-product aggregation (FAQ) over acyclic joins by message passing along
// the join tree, plus the exact gram matrix it yields.

#include "joinsketch/query.hpp"
#include "joinsketch/types.hpp"

#include <concepts>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace joinsketch {

/// A semiring: zero() is the identity of add and annihilates mul, one() the
/// identity of mul. add must be commutative; mul need not be.
template <class S>
concept Semiring = requires(const S& s, const typename S::value_type& a, const typename S::value_type& b) {
  { s.zero() } -> std::convertible_to<typename S::value_type>;
  { s.one() } -> std::convertible_to<typename S::value_type>;
  { s.add(a, b) } -> std::convertible_to<typename S::value_type>;
  { s.mul(a, b) } -> std::convertible_to<typename S::value_type>;
};

/// Counting semiring over 64-bit integers.
struct CountSemiring {
  using value_type = std::int64_t;
  value_type zero() const { return 0; }
  value_type one() const { return 1; }
  value_type add(value_type a, value_type b) const { return a + b; }
  value_type mul(value_type a, value_type b) const { return a * b; }
};

/// (R, +, *).
struct SumProductSemiring {
  using value_type = double;
  value_type zero() const { return 0.0; }
  value_type one() const { return 1.0; }
  value_type add(value_type a, value_type b) const { return a + b; }
  value_type mul(value_type a, value_type b) const { return a * b; }
};

/// (R u {+inf}, min, +).
struct MinPlusSemiring {
  using value_type = double;
  value_type zero() const { return std::numeric_limits<double>::infinity(); }
  value_type one() const { return 0.0; }
  value_type add(value_type a, value_type b) const { return a < b ? a : b; }
  value_type mul(value_type a, value_type b) const { return a + b; }
};

/// (+)_{X in J} F_{rho_1}(X_{rho_1}) (x) ... (x) F_{rho_m}(X_{rho_m}), where
/// factor(t, r) is F_t at row r of table t. Messages flow from the leaves of
/// the join tree to the root; each table's value is multiplied by its
/// children's messages in ascending order, which realizes the rho order.
template <Semiring S, class Factor>
typename S::value_type faq_eval(const JoinQuery& q, const S& s, Factor&& factor) {
  using V = typename S::value_type;
  const auto m = q.tables.size();
  std::vector<std::vector<V>> msg(m);
  std::vector<std::vector<char>> present(m);
  V result = s.zero();
  for (auto it = q.rho.rbegin(); it != q.rho.rend(); ++it) {
    const auto t = static_cast<std::size_t>(*it);
    const bool root = q.parent[t] < 0;
    if (!root) {
      msg[t].assign(static_cast<std::size_t>(q.group_count[t]), s.zero());
      present[t].assign(static_cast<std::size_t>(q.group_count[t]), 0);
    }
    const auto& children = q.children[t];
    for (Index r = 0; r < q.tables[t].rows(); ++r) {
      const auto ru = static_cast<std::size_t>(r);
      bool joins = true;
      for (const Index c : children) {
        const Index g = q.link[static_cast<std::size_t>(c)][ru];
        joins = joins && g >= 0 && present[static_cast<std::size_t>(c)][static_cast<std::size_t>(g)];
      }
      if (!joins) continue;
      V v = factor(static_cast<Index>(t), r);
      for (const Index c : children) {
        const auto cu = static_cast<std::size_t>(c);
        v = s.mul(v, msg[cu][static_cast<std::size_t>(q.link[cu][ru])]);
      }
      if (root) {
        result = s.add(result, v);
      } else {
        const auto g = static_cast<std::size_t>(q.group[t][ru]);
        msg[t][g] = present[t][g] ? s.add(msg[t][g], v) : std::move(v);
        present[t][g] = 1;
      }
    }
    for (const Index c : children) {
      msg[static_cast<std::size_t>(c)].clear();
      msg[static_cast<std::size_t>(c)].shrink_to_fit();
    }
  }
  return result;
}

/// Running (count, mean, centered second moment) of a multiset of reals.
/// (+) merges multisets, (x) forms all pairwise sums; both keep the
/// centered form, so sums of squares are accumulated without cancellation.
struct Moments {
  double n = 0;
  double mean = 0;
  double m2 = 0;
  double sum_squares() const { return m2 + n * mean * mean; }
};

struct MomentSemiring {
  using value_type = Moments;
  value_type zero() const { return {}; }
  value_type one() const { return {1.0, 0.0, 0.0}; }
  value_type add(const value_type& a, const value_type& b) const {
    if (a.n == 0) return b;
    if (b.n == 0) return a;
    const double n = a.n + b.n, delta = b.mean - a.mean;
    return {n, a.mean + delta * (b.n / n), a.m2 + b.m2 + delta * delta * (a.n * b.n / n)};
  }
  value_type mul(const value_type& a, const value_type& b) const {
    return {a.n * b.n, a.mean + b.mean, b.n * a.m2 + a.n * b.m2};
  }
};

/// ||J w||^2 for w in join column space.
double join_quadratic(const JoinQuery& q, const VectorXd& w);

/// Number of join rows.
std::int64_t count_rows(const JoinQuery& q);

struct GramMatrix {
  MatrixXd gram;
  std::vector<std::string> columns;
  /// FAQ evaluations used; d(d+1)/2 for d columns.
  std::int64_t evaluations = 0;
};

/// J^T J over the given join columns (all columns when empty), one
/// sum-product FAQ per entry of the upper triangle.
GramMatrix gram_via_faq(const JoinQuery& q, const std::vector<Index>& columns = {});

/// sum_i l_i / (l_i + lambda) over the eigenvalues of a symmetric PSD gram.
/// Eigenvalues below 1e-12 of the largest count as zero. Throws ConfigError
/// for lambda < 0.
double statistical_dimension(const MatrixXd& gram, double lambda);

}  // namespace joinsketch
