#include "joinsketch/dbsketch.hpp"

#include "joinsketch/fft.hpp"
#include "joinsketch/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace joinsketch {

namespace {

MatrixXd random_matrix(Rng& rng, Index r, Index c) {
  MatrixXd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * rng.uniform() - 1.0;
  return m;
}

MatrixXcd random_spectrum(Rng& rng, Index r, Index c) {
  MatrixXcd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
  return m;
}

}  // namespace

MatrixXd kronecker(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// --- TensorSketchAlgebra ------------------------------------------------------

MatrixXcd TensorSketchAlgebra::add(const MatrixXcd& a, const MatrixXcd& b) const {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  require_dims(a.rows() == b.rows() && a.cols() == b.cols(), "TensorSketchAlgebra: (+) of mismatched shapes");
  return a + b;
}

MatrixXcd TensorSketchAlgebra::mul(const MatrixXcd& a, const MatrixXcd& b) const {
  if (a.size() == 0 || b.size() == 0) return {};
  require_dims(a.rows() == b.rows(), "TensorSketchAlgebra: (.) of spectra with different lengths");
  if (a.cols() == b.cols()) return a.cwiseProduct(b);
  if (a.cols() == 1) return b.array().colwise() * a.col(0).array();
  if (b.cols() == 1) return a.array().colwise() * b.col(0).array();
  throw DimensionError("TensorSketchAlgebra: (.) needs equal widths or a k x 1 operand");
}

MatrixXcd TensorSketchAlgebra::unit(Index table, Index row) const {
  MatrixXd e = MatrixXd::Zero(ts_.rows(), 1);
  e(ts_.bucket(table, row), 0) = ts_.sign(table, row);
  return fft::forward(e);
}

MatrixXcd TensorSketchAlgebra::encode(Index table, Index row, const RowVectorXd& v) const {
  return unit(table, row) * v.cast<std::complex<double>>();
}

MatrixXcd TensorSketchAlgebra::encode_matrix(Index table, const MatrixXd& a) const {
  return fft::forward(ts_.factor_sketch(table, a));
}

MatrixXd TensorSketchAlgebra::finalize(const MatrixXcd& v, Index d) const {
  if (v.size() == 0) return MatrixXd::Zero(ts_.rows(), d);
  require_dims(v.cols() == d, "TensorSketchAlgebra: result width differs from the join dimension");
  return fft::inverse(v);
}

LawCheck TensorSketchAlgebra::verify_laws(int trials, Seed seed) const {
  LawCheck out;
  Rng rng(seed);
  const Index k = ts_.rows();
  for (int t = 0; t < trials; ++t, ++out.trials) {
    const Index w = 1 + static_cast<Index>(rng.below(3));
    const Index wa = rng.below(2) ? 1 : w;
    const MatrixXcd a = random_spectrum(rng, k, wa);
    const MatrixXcd b = random_spectrum(rng, k, w), c = random_spectrum(rng, k, w), e = random_spectrum(rng, k, w);
    if (auto f = semiring_law_violation(*this, a, b, c, e); !f.empty()) {
      out.ok = false;
      out.failure = f;
      return out;
    }
    // Encoder linearity and Kronecker factorization on explicit inputs.
    const Index n1 = 1 + static_cast<Index>(rng.below(5)), n2 = 1 + static_cast<Index>(rng.below(5));
    const Index f1 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(ts_.factors())));
    const MatrixXd x1 = random_matrix(rng, n1, w), x2 = random_matrix(rng, n1, w);
    if (!approx_equal(encode_matrix(f1, x1 + x2), add(encode_matrix(f1, x1), encode_matrix(f1, x2)))) {
      out.ok = false;
      out.failure = "F(A1 + A2) != F(A1) (+) F(A2)";
      return out;
    }
    if (ts_.factors() >= 2) {
      const MatrixXd u = random_matrix(rng, n1, 1), vb = random_matrix(rng, n2, w);
      const MatrixXd kron = kronecker(u, vb);
      MatrixXd direct = MatrixXd::Zero(k, w);
      for (Index i = 0; i < n1; ++i)
        for (Index j = 0; j < n2; ++j) {
          const Index idx[2] = {i, j};
          direct.row(ts_.kron_bucket(idx)) += ts_.kron_sign(idx) * kron.row(i * n2 + j);
        }
      if (!approx_equal(MatrixXd(fft::inverse(mul(encode_matrix(0, u), encode_matrix(1, vb)))), direct)) {
        out.ok = false;
        out.failure = "F(A (x) B) != F(A) (.) F(B)";
        return out;
      }
    }
  }
  return out;
}

// --- IdentityAlgebra ----------------------------------------------------------

IdentityAlgebra::IdentityAlgebra(std::vector<Index> table_rows, std::int64_t cap)
    : rows_(std::move(table_rows)), cap_(cap) {}

IdentityAlgebra::IdentityAlgebra(const JoinQuery& q, std::int64_t cap) : cap_(cap) {
  for (const auto& t : q.tables) rows_.push_back(t.rows());
}

MatrixXd IdentityAlgebra::add(const MatrixXd& a, const MatrixXd& b) const {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  require_dims(a.rows() == b.rows() && a.cols() == b.cols(), "IdentityAlgebra: (+) of mismatched shapes");
  return a + b;
}

MatrixXd IdentityAlgebra::mul(const MatrixXd& a, const MatrixXd& b) const {
  if (a.size() == 0 || b.size() == 0) return {};
  return kronecker(a, b);
}

MatrixXd IdentityAlgebra::unit(Index table, Index row) const {
  MatrixXd e = MatrixXd::Zero(rows_.at(static_cast<std::size_t>(table)), 1);
  e(row, 0) = 1.0;
  return e;
}

MatrixXd IdentityAlgebra::encode(Index table, Index row, const RowVectorXd& v) const {
  return unit(table, row) * v;
}

MatrixXd IdentityAlgebra::finalize(const MatrixXd& v, Index d) const {
  std::int64_t n = 1;
  for (const Index r : rows_) n *= r;
  if (n * d > cap_)
    throw AlgorithmError(fmt::format("identity algebra: zero-padded join has {} x {} entries, above the cap {}", n, d,
                                     cap_));
  if (v.size() == 0) return MatrixXd::Zero(n, d);
  return v;
}

LawCheck IdentityAlgebra::verify_laws(int trials, Seed seed) const {
  LawCheck out;
  Rng rng(seed);
  for (int t = 0; t < trials; ++t, ++out.trials) {
    const auto dim = [&] { return 1 + static_cast<Index>(rng.below(3)); };
    const Index ar = dim(), ac = dim(), br = dim(), bc = dim();
    const MatrixXd a = random_matrix(rng, ar, ac);
    const MatrixXd b = random_matrix(rng, br, bc), c = random_matrix(rng, br, bc), e = random_matrix(rng, br, bc);
    if (auto f = semiring_law_violation(*this, a, b, c, e); !f.empty()) {
      out.ok = false;
      out.failure = f;
      return out;
    }
    // Mixed product: (A (x) B)(C (x) D) = AC (x) BD.
    const MatrixXd cc = random_matrix(rng, ac, dim()), dd = random_matrix(rng, bc, dim());
    if (!approx_equal(MatrixXd(mul(a, b) * mul(cc, dd)), mul(MatrixXd(a * cc), MatrixXd(b * dd)))) {
      out.ok = false;
      out.failure = "mixed-product property of (.) fails";
      return out;
    }
  }
  return out;
}

// --- ridge sketch -------------------------------------------------------------

Index default_ridge_rows(Index d, double epsilon, double factor) {
  return std::max<Index>(1, static_cast<Index>(std::ceil(factor * static_cast<double>(d) / (epsilon * epsilon))));
}

MatrixXd general_ridge_sketch(const JoinQuery& q, double epsilon, double lambda, Seed seed, std::optional<Index> k) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError(fmt::format("epsilon must lie in (0, 1), got {}", epsilon));
  if (!(lambda >= 0.0)) throw ConfigError(fmt::format("lambda must be >= 0, got {}", lambda));
  const Index rows = k.value_or(default_ridge_rows(q.dim(), epsilon));
  if (rows <= 0) throw ConfigError(fmt::format("sketch dimension k must be positive, got {}", rows));
  return dbsketch_eval(q, TensorSketchAlgebra(rows, q.table_count(), seed));
}

}  // namespace joinsketch
