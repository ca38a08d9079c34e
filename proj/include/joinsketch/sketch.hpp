#pragma once

// Seeded oblivious sketches: CountSketch, OSNAP, TensorSketch and a dense
// Gaussian projection. Operators hold only their parameters and seed; all
// hash and sign tables are recomputed from the seed on demand, so an operator
// is O(1) memory and safe to apply from many threads.

#include "joinsketch/fft.hpp"
#include "joinsketch/random.hpp"
#include "joinsketch/types.hpp"

#include <Eigen/SparseCore>

#include <cmath>
#include <span>
#include <vector>

namespace joinsketch {

namespace detail {
inline double sign_bit(std::uint64_t h) { return (h >> 63) ? -1.0 : 1.0; }
}  // namespace detail

// =============================================================================
/// CountSketch: a k x n matrix with exactly one +-1 per column.
class CountSketch {
 public:
  CountSketch(Index rows, Index input_dim, Seed seed)
      : rows_(rows), input_dim_(input_dim), seed_(seed) {
    if (rows <= 0 || input_dim < 0) throw ConfigError("CountSketch: rows must be positive");
  }

  Index rows() const { return rows_; }
  Index input_dim() const { return input_dim_; }
  Seed seed() const { return seed_; }

  Index bucket(Index i) const {
    return static_cast<Index>(hash64(seed_, 0, static_cast<std::uint64_t>(i)) %
                              static_cast<std::uint64_t>(rows_));
  }
  double sign(Index i) const { return detail::sign_bit(hash64(seed_, 1, static_cast<std::uint64_t>(i))); }

  template <class Derived>
  Matrix<typename Derived::Scalar> apply(const Eigen::MatrixBase<Derived>& a) const {
    require_dims(a.rows() == input_dim_, "CountSketch::apply: row count does not match input dimension");
    Matrix<typename Derived::Scalar> out = Matrix<typename Derived::Scalar>::Zero(rows_, a.cols());
    for (Index i = 0; i < a.rows(); ++i) out.row(bucket(i)) += sign(i) * a.row(i);
    return out;
  }

  template <class Scalar, int Options, class StorageIndex>
  Matrix<Scalar> apply(const Eigen::SparseMatrix<Scalar, Options, StorageIndex>& a) const {
    require_dims(a.rows() == input_dim_, "CountSketch::apply: row count does not match input dimension");
    Matrix<Scalar> out = Matrix<Scalar>::Zero(rows_, a.cols());
    for (Index outer = 0; outer < a.outerSize(); ++outer)
      for (typename Eigen::SparseMatrix<Scalar, Options, StorageIndex>::InnerIterator it(a, outer); it; ++it)
        out(bucket(it.row()), it.col()) += sign(it.row()) * it.value();
    return out;
  }

  /// Explicit k x n matrix. Test and diagnostics use only.
  MatrixXd to_dense() const {
    MatrixXd s = MatrixXd::Zero(rows_, input_dim_);
    for (Index i = 0; i < input_dim_; ++i) s(bucket(i), i) = sign(i);
    return s;
  }

 private:
  Index rows_;
  Index input_dim_;
  Seed seed_;
};

// =============================================================================
/// OSNAP: a t x n matrix with exactly s nonzeros of magnitude 1/sqrt(s) per
/// column, placed in distinct rows.
class OsnapSketch {
 public:
  OsnapSketch(Index rows, Index input_dim, Index nnz_per_col, Seed seed)
      : rows_(rows), input_dim_(input_dim), s_(nnz_per_col), seed_(seed),
        scale_(1.0 / std::sqrt(static_cast<double>(nnz_per_col))) {
    if (rows <= 0) throw ConfigError("OsnapSketch: rows must be positive");
    if (nnz_per_col <= 0 || nnz_per_col > rows)
      throw ConfigError("OsnapSketch: nonzeros per column must lie in [1, rows]");
  }

  Index rows() const { return rows_; }
  Index input_dim() const { return input_dim_; }
  Index nnz_per_col() const { return s_; }

  /// Calls fn(row, value) for each of the s nonzeros of column i.
  template <class Fn>
  void for_each_entry(Index i, Fn&& fn) const {
    constexpr Index kInline = 32;
    Index inline_rows[kInline];
    std::vector<Index> spill;
    Index* chosen = inline_rows;
    if (s_ > kInline) {
      spill.resize(static_cast<std::size_t>(s_));
      chosen = spill.data();
    }
    const auto col = static_cast<std::uint64_t>(i);
    std::uint64_t attempt = 0;
    for (Index j = 0; j < s_; ++j) {
      Index r;
      bool dup;
      do {
        r = static_cast<Index>(hash64(seed_, 2 + attempt++, col) % static_cast<std::uint64_t>(rows_));
        dup = false;
        for (Index q = 0; q < j; ++q) dup = dup || chosen[q] == r;
      } while (dup);
      chosen[j] = r;
      fn(r, scale_ * detail::sign_bit(hash64(seed_, 1, col * static_cast<std::uint64_t>(s_) + j)));
    }
  }

  template <class Derived>
  Matrix<typename Derived::Scalar> apply(const Eigen::MatrixBase<Derived>& a) const {
    require_dims(a.rows() == input_dim_, "OsnapSketch::apply: row count does not match input dimension");
    Matrix<typename Derived::Scalar> out = Matrix<typename Derived::Scalar>::Zero(rows_, a.cols());
    for (Index i = 0; i < a.rows(); ++i)
      for_each_entry(i, [&](Index r, double v) { out.row(r) += v * a.row(i); });
    return out;
  }

  MatrixXd to_dense() const {
    MatrixXd w = MatrixXd::Zero(rows_, input_dim_);
    for (Index i = 0; i < input_dim_; ++i) for_each_entry(i, [&](Index r, double v) { w(r, i) = v; });
    return w;
  }

 private:
  Index rows_;
  Index input_dim_;
  Index s_;
  Seed seed_;
  double scale_;
};

// =============================================================================
/// TensorSketch over a Kronecker product of `factors` inputs. Factor f has its
/// own CountSketch hash h_f and sign s_f into k buckets; the induced sketch of
/// a Kronecker row (i_1, ..., i_m) has bucket (sum h_f(i_f)) mod k and sign
/// prod s_f(i_f). Products of factor sketches are evaluated as length-k
/// cyclic convolutions in the Fourier domain.
class TensorSketch {
 public:
  TensorSketch(Index k, Index factors, Seed seed) : k_(k), factors_(factors), seed_(seed) {
    if (k <= 0) throw ConfigError("TensorSketch: target dimension must be positive");
    if (factors <= 0) throw ConfigError("TensorSketch: needs at least one factor");
  }

  Index rows() const { return k_; }
  Index factors() const { return factors_; }
  Seed seed() const { return seed_; }

  Index bucket(Index factor, Index i) const {
    return static_cast<Index>(hash64(seed_, 2 * static_cast<std::uint64_t>(factor), static_cast<std::uint64_t>(i)) %
                              static_cast<std::uint64_t>(k_));
  }
  double sign(Index factor, Index i) const {
    return detail::sign_bit(hash64(seed_, 2 * static_cast<std::uint64_t>(factor) + 1, static_cast<std::uint64_t>(i)));
  }

  /// Bucket of the Kronecker row with factor indices idx[0..m).
  Index kron_bucket(std::span<const Index> idx) const {
    Index b = 0;
    for (std::size_t f = 0; f < idx.size(); ++f) b = (b + bucket(static_cast<Index>(f), idx[f])) % k_;
    return b;
  }
  double kron_sign(std::span<const Index> idx) const {
    double s = 1.0;
    for (std::size_t f = 0; f < idx.size(); ++f) s *= sign(static_cast<Index>(f), idx[f]);
    return s;
  }

  /// CountSketch of `a` with factor f's hash. Row l of `a` is treated as
  /// input index ids[l] (or l when ids is empty).
  template <class Derived>
  MatrixXd factor_sketch(Index factor, const Eigen::MatrixBase<Derived>& a, std::span<const Index> ids = {}) const {
    require_dims(ids.empty() || static_cast<Index>(ids.size()) == a.rows(),
                 "TensorSketch: id list length does not match rows");
    MatrixXd out = MatrixXd::Zero(k_, a.cols());
    for (Index l = 0; l < a.rows(); ++l) {
      const Index id = ids.empty() ? l : ids[static_cast<std::size_t>(l)];
      out.row(bucket(factor, id)) += sign(factor, id) * a.row(l).template cast<double>();
    }
    return out;
  }

  /// Sketch of a (x) b for vectors a (factor 0) and b (factor 1).
  template <class DA, class DB>
  VectorXd pair(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) const {
    require_dims(factors_ == 2, "TensorSketch::pair: operator must have two factors");
    require_dims(a.cols() == 1 && b.cols() == 1, "TensorSketch::pair: inputs must be vectors");
    return fft::circular_convolve(factor_sketch(0, a), factor_sketch(1, b));
  }

  /// Sketch of the block matrix  A (x) 1_q + 1_p (x) B  (p*q rows, row
  /// (l1, l2) equal to A_l1 + B_l2) without forming it. Rows of A and B are
  /// hashed as ids_a / ids_b; pass global table row ids so that different
  /// blocks hash independently.
  MatrixXd block(const MatrixXd& a, const MatrixXd& b, std::span<const Index> ids_a = {},
                 std::span<const Index> ids_b = {}) const;

 private:
  Index k_;
  Index factors_;
  Seed seed_;
};

// =============================================================================
/// Dense d x t Gaussian matrix with i.i.d. N(0, 1/t) entries.
class GaussianSketch {
 public:
  GaussianSketch(Index input_dim, Index cols, Seed seed);

  Index input_dim() const { return g_.rows(); }
  Index cols() const { return g_.cols(); }
  const MatrixXd& matrix() const { return g_; }

  /// x^T G.
  template <class Derived>
  RowVectorXd project(const Eigen::MatrixBase<Derived>& x) const {
    require_dims(x.size() == g_.rows(), "GaussianSketch::project: dimension mismatch");
    return x.reshaped().transpose().template cast<double>() * g_;
  }

 private:
  MatrixXd g_;
};

/// Standard normal vector g ~ N(0, I_d).
VectorXd gaussian_vector(Index d, Seed seed);

}  // namespace joinsketch
