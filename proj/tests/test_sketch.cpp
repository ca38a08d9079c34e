#include "joinsketch/sketch.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/SparseCore>

#include <random>

using namespace joinsketch;

namespace {

MatrixXd random_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  MatrixXd m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = nd(gen);
  return m;
}

// Explicit k x (d1 d2) matrix of the CountSketch induced on Kronecker rows.
MatrixXd explicit_tensor_sketch(const TensorSketch& ts, Index d1, Index d2) {
  MatrixXd s = MatrixXd::Zero(ts.rows(), d1 * d2);
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j) {
      const Index bucket = (ts.bucket(0, i) + ts.bucket(1, j)) % ts.rows();
      s(bucket, i * d2 + j) = ts.sign(0, i) * ts.sign(1, j);
    }
  return s;
}

VectorXd kron(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

}  // namespace

TEST_CASE("countsketch: zero, single row and explicit-matrix oracle") {
  const CountSketch cs(7, 20, Seed{11});
  CHECK(cs.apply(MatrixXd::Zero(20, 3)).isZero(0));

  const CountSketch one(5, 1, Seed{3});
  RowVectorXd v(3);
  v << 1.5, -2, 4;
  const MatrixXd out = one.apply(MatrixXd(v));
  for (Index r = 0; r < 5; ++r) {
    if (r == one.bucket(0)) CHECK(out.row(r).isApprox(one.sign(0) * v));
    else CHECK(out.row(r).isZero(0));
  }

  const MatrixXd a = random_matrix(20, 3, 1);
  CHECK(oracle::rel_err(cs.apply(a), cs.to_dense() * a) < 1e-12);
}

TEST_CASE("countsketch: sparse input matches dense input") {
  MatrixXd a = random_matrix(40, 4, 2);
  for (Index i = 0; i < a.rows(); i += 3) a.row(i).setZero();
  const Eigen::SparseMatrix<double> sp = a.sparseView();
  const CountSketch cs(9, 40, Seed{5});
  CHECK(oracle::rel_err(cs.apply(sp), cs.apply(a)) < 1e-12);
}

TEST_CASE("countsketch: one nonzero of magnitude one per column") {
  const MatrixXd s = CountSketch(13, 100, Seed{8}).to_dense();
  for (Index c = 0; c < s.cols(); ++c) {
    CHECK((s.col(c).array() != 0).count() == 1);
    CHECK(s.col(c).cwiseAbs().sum() == 1.0);
  }
}

TEST_CASE("countsketch: dimension mismatch throws") {
  const CountSketch cs(4, 10, Seed{1});
  CHECK_THROWS_AS(cs.apply(MatrixXd::Zero(9, 2)), DimensionError);
}

TEST_CASE("osnap: structure, explicit oracle and s=1 collapse") {
  const OsnapSketch os(30, 50, 8, Seed{21});
  const MatrixXd w = os.to_dense();
  for (Index c = 0; c < w.cols(); ++c) {
    CHECK((w.col(c).array() != 0).count() == 8);
    for (Index r = 0; r < w.rows(); ++r)
      if (w(r, c) != 0) CHECK(std::abs(std::abs(w(r, c)) - 1.0 / std::sqrt(8.0)) < 1e-15);
  }
  CHECK(os.apply(MatrixXd::Zero(50, 4)).isZero(0));
  const MatrixXd a = random_matrix(50, 4, 3);
  CHECK(oracle::rel_err(os.apply(a), w * a) < 1e-12);

  const MatrixXd w1 = OsnapSketch(10, 25, 1, Seed{4}).to_dense();
  for (Index c = 0; c < w1.cols(); ++c) {
    CHECK((w1.col(c).array() != 0).count() == 1);
    CHECK(w1.col(c).cwiseAbs().sum() == 1.0);
  }
  CHECK_THROWS_AS(OsnapSketch(4, 10, 5, Seed{1}), ConfigError);
}

TEST_CASE("tensorsketch pair: zero, scalar and Kronecker oracle") {
  const TensorSketch ts(16, 2, Seed{9});
  VectorXd a = VectorXd::Random(5), b = VectorXd::Random(4);
  CHECK(ts.pair(VectorXd::Zero(5), b).norm() < 1e-12);
  CHECK(ts.pair(a, VectorXd::Zero(4)).norm() < 1e-12);

  VectorXd x(1), y(1);
  x << 2;
  y << 3;
  const VectorXd s = ts.pair(x, y);
  const Index at = (ts.bucket(0, 0) + ts.bucket(1, 0)) % 16;
  for (Index r = 0; r < 16; ++r)
    CHECK(s(r) == doctest::Approx(r == at ? 6.0 * ts.sign(0, 0) * ts.sign(1, 0) : 0.0).epsilon(1e-12));

  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 50; ++trial) {
    const Index d1 = 1 + static_cast<Index>(gen() % 8), d2 = 1 + static_cast<Index>(gen() % 8);
    const Index k = 1 + static_cast<Index>(gen() % 40);
    const TensorSketch op(k, 2, Seed{gen()});
    const VectorXd u = random_matrix(d1, 1, gen()), v = random_matrix(d2, 1, gen());
    const VectorXd want = explicit_tensor_sketch(op, d1, d2) * kron(u, v);
    CHECK(oracle::rel_err(op.pair(u, v), want) < 1e-9);
  }
}

TEST_CASE("tensorsketch block: matches sketch of the materialized block") {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 30; ++trial) {
    const Index p = 1 + static_cast<Index>(gen() % 7), q = 1 + static_cast<Index>(gen() % 7);
    const Index d = 1 + static_cast<Index>(gen() % 5), k = 1 + static_cast<Index>(gen() % 33);
    const TensorSketch ts(k, 2, Seed{gen()});
    const MatrixXd a = random_matrix(p, d, gen());
    MatrixXd b = random_matrix(q, d, gen());
    if (trial % 3 == 0) b.setZero();
    std::vector<Index> ia(static_cast<std::size_t>(p)), ib(static_cast<std::size_t>(q));
    for (auto& v : ia) v = static_cast<Index>(gen() % 1000);
    for (auto& v : ib) v = static_cast<Index>(gen() % 1000);
    MatrixXd want = MatrixXd::Zero(k, d);
    for (Index l1 = 0; l1 < p; ++l1)
      for (Index l2 = 0; l2 < q; ++l2) {
        const Index bucket = (ts.bucket(0, ia[l1]) + ts.bucket(1, ib[l2])) % k;
        want.row(bucket) += ts.sign(0, ia[l1]) * ts.sign(1, ib[l2]) * (a.row(l1) + b.row(l2));
      }
    CHECK(oracle::rel_err(ts.block(a, b, ia, ib), want) < 1e-9);
  }
}

TEST_CASE("tensorsketch block: 1x1 block sketches the single joined row") {
  const TensorSketch ts(8, 2, Seed{2});
  MatrixXd a(1, 3), b(1, 3);
  a << 1, 1, 0;
  b << 0, 0, 2;
  const MatrixXd s = ts.block(a, b);
  const Index at = (ts.bucket(0, 0) + ts.bucket(1, 0)) % 8;
  RowVectorXd row(3);
  row << 1, 1, 2;
  CHECK((s.row(at) - ts.sign(0, 0) * ts.sign(1, 0) * row).norm() < 1e-12);
  CHECK(s.norm() == doctest::Approx(row.norm()).epsilon(1e-12));
}

TEST_CASE("linearity of every sketch family") {
  const MatrixXd a = random_matrix(30, 5, 41), b = random_matrix(30, 5, 42);
  const CountSketch cs(11, 30, Seed{1});
  const OsnapSketch os(17, 30, 4, Seed{2});
  const GaussianSketch g(30, 6, Seed{3});
  CHECK(oracle::rel_err(cs.apply((a + b).eval()), cs.apply(a) + cs.apply(b)) < 1e-9);
  CHECK(oracle::rel_err(os.apply((a + b).eval()), os.apply(a) + os.apply(b)) < 1e-9);
  CHECK(oracle::rel_err(g.project((a.col(0) + b.col(0)).eval()), g.project(a.col(0)) + g.project(b.col(0))) < 1e-9);
  const TensorSketch ts(19, 2, Seed{4});
  const MatrixXd c = random_matrix(6, 5, 43), e = random_matrix(5, 5, 44);
  CHECK(oracle::rel_err(ts.block(a.topRows(6) + c, e), ts.block(a.topRows(6), MatrixXd::Zero(5, 5)) +
                                                          ts.block(c, e)) < 1e-9);
}

TEST_CASE("determinism: equal seeds give identical operators") {
  const MatrixXd a = random_matrix(25, 3, 5);
  CHECK(CountSketch(6, 25, Seed{77}).apply(a) == CountSketch(6, 25, Seed{77}).apply(a));
  CHECK(OsnapSketch(9, 25, 3, Seed{77}).apply(a) == OsnapSketch(9, 25, 3, Seed{77}).apply(a));
  CHECK(GaussianSketch(25, 4, Seed{77}).matrix() == GaussianSketch(25, 4, Seed{77}).matrix());
  CHECK(CountSketch(6, 25, Seed{77}).apply(a) != CountSketch(6, 25, Seed{78}).apply(a));
}

TEST_CASE("gaussian projection: zero input and norm preservation in expectation") {
  const VectorXd x = random_matrix(6, 1, 7);
  CHECK(GaussianSketch(6, 5, Seed{1}).project(VectorXd::Zero(6)).isZero(0));
  double mean = 0;
  const int trials = 10000;
  for (int s = 0; s < trials; ++s) mean += GaussianSketch(6, 4, Seed{1000u + s}).project(x).squaredNorm();
  mean /= trials * x.squaredNorm();
  CHECK(std::abs(mean - 1.0) < 0.05);

  // t = 1: the single output is N(0, |x|^2).
  double m1 = 0, m2 = 0;
  for (int s = 0; s < trials; ++s) {
    const double y = GaussianSketch(6, 1, Seed{50000u + s}).project(x)(0);
    m1 += y;
    m2 += y * y;
  }
  m1 /= trials;
  const double var = m2 / trials - m1 * m1;
  CHECK(std::abs(var / x.squaredNorm() - 1.0) < 0.05);
}

TEST_CASE("countsketch subspace embedding at eps = 0.5") {
  const double eps = 0.5;
  const Index d = 5;
  const Index k = static_cast<Index>(std::ceil(40.0 * d * d / (eps * eps)));
  int pass = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const MatrixXd a = random_matrix(200, d, 900 + trial);
    const MatrixXd sa = CountSketch(k, 200, Seed{static_cast<std::uint64_t>(trial)}).apply(a);
    const auto [lo, hi] = oracle::spectral_range(a.transpose() * a, sa.transpose() * sa);
    if (lo >= (1 - eps) * (1 - eps) && hi <= (1 + eps) * (1 + eps)) ++pass;
  }
  CHECK(pass >= 95);
}

TEST_CASE("fft: cyclic convolution matches the direct sum for every length up to 64") {
  for (Index n = 1; n <= 64; ++n) {
    const VectorXd a = random_matrix(n, 1, 300 + n), b = random_matrix(n, 1, 400 + n);
    VectorXd want = VectorXd::Zero(n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) want((i + j) % n) += a(i) * b(j);
    CHECK(oracle::rel_err(fft::circular_convolve(a, b), want) < 1e-12);
    CHECK(oracle::rel_err(fft::inverse(fft::forward(a)), a) < 1e-12);
  }
}
