#pragma once

// Sketching a zero-padded join as a FAQ. An algebra supplies per-table row
// encoders, an accumulation (+) and a combination (.) such that the encoded
// join F(J) is the sum over join tuples of the rho-ordered product of the
// encoders. Evaluating one FAQ per table, with the row encoder on that table
// and unit encoders on the others, and adding the rounds gives F(J).

#include "joinsketch/faq.hpp"
#include "joinsketch/query.hpp"
#include "joinsketch/sketch.hpp"
#include "joinsketch/types.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace joinsketch {

struct LawCheck {
  bool ok = true;
  int trials = 0;
  /// First violated law, empty when ok.
  std::string failure;
};

/// Same shape and |x - y| <= tol * max(1, |x|, |y|). Empty matrices are equal.
template <class M>
bool approx_equal(const M& x, const M& y, double tol = 1e-9) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
  if (x.size() == 0) return true;
  return (x - y).norm() <= tol * std::max({1.0, x.norm(), y.norm()});
}

/// First semiring law violated on the sample, or empty. `a` may have any
/// shape; b, c and e must share one shape.
template <class A, class M>
std::string semiring_law_violation(const A& alg, const M& a, const M& b, const M& c, const M& e) {
  const auto eq = [](const M& x, const M& y) { return approx_equal(x, y); };
  if (!eq(alg.add(b, c), alg.add(c, b))) return "(+) is not commutative";
  if (!eq(alg.add(alg.add(b, c), e), alg.add(b, alg.add(c, e)))) return "(+) is not associative";
  if (!eq(alg.add(alg.zero(), b), b) || !eq(alg.add(b, alg.zero()), b)) return "zero is not the (+) identity";
  if (!eq(alg.mul(alg.mul(a, b), c), alg.mul(a, alg.mul(b, c)))) return "(.) is not associative";
  if (!eq(alg.mul(alg.one(), a), a) || !eq(alg.mul(a, alg.one()), a)) return "one is not the (.) identity";
  if (!eq(alg.mul(a, alg.zero()), alg.zero()) || !eq(alg.mul(alg.zero(), a), alg.zero()))
    return "zero does not annihilate";
  if (!eq(alg.mul(a, alg.add(b, c)), alg.add(alg.mul(a, b), alg.mul(a, c))))
    return "(.) does not distribute over (+) from the left";
  if (!eq(alg.mul(alg.add(b, c), a), alg.add(alg.mul(b, a), alg.mul(c, a))))
    return "(.) does not distribute over (+) from the right";
  return {};
}

/// Trials dbsketch_eval runs before evaluating.
inline constexpr int kDbSketchLawTrials = 8;

// =============================================================================
/// TensorSketch algebra. Values are k x w spectra (w = 1 for unit encoders,
/// d for row encoders). The unit encoder of row r of table j is the Fourier
/// transform of that row's CountSketch column under factor j of a TensorSketch;
/// (.) is the pointwise product broadcasting k x 1 against k x d, (+) is
/// addition with the empty matrix as zero. The inverse transform is applied
/// once, by finalize().
class TensorSketchAlgebra {
 public:
  using value_type = MatrixXcd;

  TensorSketchAlgebra(Index k, Index tables, Seed seed) : ts_(k, tables, seed) {}

  Index rows() const { return ts_.rows(); }
  const TensorSketch& sketch() const { return ts_; }

  value_type zero() const { return {}; }
  value_type one() const { return MatrixXcd::Ones(ts_.rows(), 1); }
  value_type add(const value_type& a, const value_type& b) const;
  value_type mul(const value_type& a, const value_type& b) const;

  value_type unit(Index table, Index row) const;
  value_type encode(Index table, Index row, const RowVectorXd& v) const;
  /// Spectrum of the CountSketch of an explicit n x w matrix under factor j.
  value_type encode_matrix(Index table, const MatrixXd& a) const;
  /// k x d sketch; zeros for the empty value.
  MatrixXd finalize(const value_type& v, Index d) const;

  /// Semiring laws on random spectra, linearity of the encoder and
  /// Kronecker factorization against the explicit TensorSketch.
  LawCheck verify_laws(int trials, Seed seed) const;

 private:
  TensorSketch ts_;
};

// =============================================================================
/// Identity algebra: F_j is the explicit matrix, (+) matrix addition, (.) the
/// Kronecker product. The unit encoder of row r of table j is e_r in R^{n_j},
/// so F(J) is the zero-padded N x d join with N = n_1 ... n_m, rows in
/// rho-lexicographic order of the row tuples. Small domains only.
class IdentityAlgebra {
 public:
  using value_type = MatrixXd;

  /// Row counts of the tables; finalize() refuses N x d above `cap` entries.
  explicit IdentityAlgebra(std::vector<Index> table_rows, std::int64_t cap = 50'000'000);
  explicit IdentityAlgebra(const JoinQuery& q, std::int64_t cap = 50'000'000);

  value_type zero() const { return {}; }
  value_type one() const { return MatrixXd::Ones(1, 1); }
  value_type add(const value_type& a, const value_type& b) const;
  value_type mul(const value_type& a, const value_type& b) const;

  value_type unit(Index table, Index row) const;
  value_type encode(Index table, Index row, const RowVectorXd& v) const;
  MatrixXd finalize(const value_type& v, Index d) const;

  LawCheck verify_laws(int trials, Seed seed) const;

 private:
  std::vector<Index> rows_;
  std::int64_t cap_;
};

/// Kronecker product a (x) b.
MatrixXd kronecker(const MatrixXd& a, const MatrixXd& b);

/// F(J) = (+)_i FAQ_i with g_i = F_i(v(X_i)) on table i and g_j = F_j(e(X_j))
/// elsewhere. Tables that own no column are skipped, their round is zero.
/// Throws AlgorithmError when the algebra fails its law check.
template <class Algebra>
MatrixXd dbsketch_eval(const JoinQuery& q, const Algebra& alg) {
  const LawCheck laws = alg.verify_laws(kDbSketchLawTrials, Seed{0x6c617773ULL});
  if (!laws.ok) throw AlgorithmError("dbsketch_eval: algebra law check failed: " + laws.failure);
  typename Algebra::value_type acc = alg.zero();
  for (Index i = 0; i < q.table_count(); ++i) {
    if (q.partition.assigned[static_cast<std::size_t>(i)].empty()) continue;
    acc = alg.add(acc, faq_eval(q, alg, [&](Index t, Index r) {
      return t == i ? alg.encode(t, r, q.padded_row(i, r)) : alg.unit(t, r);
    }));
  }
  return alg.finalize(acc, q.dim());
}

/// Rows of the ridge sketch by default: ceil(factor * d / eps^2). d bounds
/// the statistical dimension from above for every lambda.
Index default_ridge_rows(Index d, double epsilon, double factor = 8.0);

/// k x d TensorSketch of the zero-padded join evaluated as a DB-Sketch, with
/// k = override or default_ridge_rows. Throws ConfigError for lambda < 0 or
/// eps outside (0, 1).
MatrixXd general_ridge_sketch(const JoinQuery& q, double epsilon, double lambda, Seed seed,
                              std::optional<Index> k = std::nullopt);

}  // namespace joinsketch
