#include "joinsketch/dbsketch.hpp"
#include "joinsketch/faq.hpp"
#include "joinsketch/regression.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace joinsketch;

namespace {

TwoTableJoin example_join() { return make_two_table_join(oracle::example_t1(), oracle::example_t2(), {"f2"}); }

TwoTableJoin keyed_join(Index n1, Index n2, int card, Index fa, Index fb, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<std::string> ca, cb;
  for (Index i = 0; i < fa; ++i) ca.push_back("x" + std::to_string(i));
  for (Index i = 0; i < fb; ++i) cb.push_back("y" + std::to_string(i));
  return make_two_table_join(oracle::random_table("A", {"k"}, ca, n1, card, gen),
                             oracle::random_table("B", {"k"}, cb, n2, card, gen), {"k"});
}

/// Normal-equation oracle on the materialized join.
VectorXd oracle_lstsq(const MatrixXd& j, const std::vector<Index>& u, Index target) {
  MatrixXd a(j.rows(), static_cast<Index>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i) a.col(static_cast<Index>(i)) = j.col(u[i]);
  return (a.transpose() * a).ldlt().solve(a.transpose() * j.col(target));
}

double oracle_residual(const MatrixXd& j, const std::vector<Index>& u, Index target, const VectorXd& x) {
  VectorXd r = -j.col(target);
  for (std::size_t i = 0; i < u.size(); ++i) r += x(static_cast<Index>(i)) * j.col(u[i]);
  return r.norm();
}

RegressionProblem problem(const TwoTableJoin& join, std::vector<Index> u, Index target, double eps, std::uint64_t seed) {
  RegressionProblem p;
  p.join = &join;
  p.features = std::move(u);
  p.target = target;
  p.epsilon = eps;
  p.seed = Seed{seed};
  return p;
}

}  // namespace

TEST_CASE("implicit gram product on the example join") {
  const auto join = example_join();
  CHECK(implicit_gram_product(join, VectorXd::Zero(3), {0, 1, 2}).isZero());
  const RowVectorXd row = implicit_gram_product(join, VectorXd::Unit(3, 0), {0, 1, 2});
  CHECK(row == RowVectorXd((RowVectorXd(3) << 19, 12, 18).finished()));
  CHECK(implicit_gram(join) == (MatrixXd(3, 3) << 19, 12, 18, 12, 8, 12, 18, 12, 19).finished());
  CHECK_THROWS_AS(implicit_gram_product(join, VectorXd::Zero(2), {0}), DimensionError);
}

TEST_CASE("implicit products match the materialized join") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 60; ++trial) {
    const Index d1 = 1 + static_cast<Index>(gen() % 4), d2 = 1 + static_cast<Index>(gen() % 3);
    const auto join = keyed_join(1 + static_cast<Index>(gen() % 30), 1 + static_cast<Index>(gen() % 30),
                                 1 + static_cast<int>(gen() % 6), d1, d2, gen());
    const MatrixXd j = materialize_join(join);
    const Index d = join.dim();
    VectorXd w(d);
    std::normal_distribution<double> nd;
    for (Index i = 0; i < d; ++i) w(i) = nd(gen);
    std::vector<Index> u;
    for (Index c = 0; c < d; ++c)
      if (gen() % 2) u.push_back(c);
    if (u.empty()) u.push_back(0);
    const RowVectorXd want_full = w.transpose() * j.transpose() * j;
    RowVectorXd want(static_cast<Index>(u.size()));
    for (std::size_t i = 0; i < u.size(); ++i) want(static_cast<Index>(i)) = want_full(u[i]);
    CHECK(oracle::rel_err(implicit_gram_product(join, w, u), want) <= 1e-9);
    CHECK(oracle::rel_err(implicit_gram(join), j.transpose() * j) <= 1e-9);
    CHECK(implicit_quadratic(join, w) == doctest::Approx((j * w).squaredNorm()).epsilon(1e-9));
    CHECK(implicit_gram_product(join, w, u, 4) == implicit_gram_product(join, w, u, 1));
  }
}

TEST_CASE("moment semiring gives the join quadratic") {
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 40; ++trial) {
    const auto tables = oracle::random_acyclic_tables(gen, 1 + trial % 4, 12, 8, 3);
    const auto q = make_query(tables);
    const auto naive = oracle::naive_join(tables);
    VectorXd w = VectorXd::Random(q.dim());
    const double want = naive.rows.rows() ? (naive.rows * w).squaredNorm() : 0.0;
    CHECK(join_quadratic(q, w) == doctest::Approx(want).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("problem validation") {
  const auto join = example_join();
  CHECK_THROWS_AS(problem(join, {}, 2, 0.1, 1).validate(), ConfigError);
  CHECK_THROWS_AS(problem(join, {0, 2}, 2, 0.1, 1).validate(), ConfigError);
  CHECK_THROWS_AS(problem(join, {0}, 5, 0.1, 1).validate(), ConfigError);
  CHECK_THROWS_AS(problem(join, {0}, 2, 1.5, 1).validate(), ConfigError);
  CHECK_NOTHROW(problem(join, {0, 1}, 2, 0.1, 1).validate());
  CHECK(regression_iteration_cap(0.1) == 40);
  CHECK(regression_iteration_cap(0.5) == 10);
}

TEST_CASE("exact solver on the example join") {
  const auto join = example_join();
  const auto s1 = solve_exact_faq(problem(join, {0}, 2, 0.1, 1));
  CHECK(s1.x(0) == doctest::Approx(18.0 / 19.0));

  const MatrixXd j = materialize_join(join);
  const auto s2 = solve_exact_faq(problem(join, {0, 1}, 2, 0.1, 1));
  const VectorXd want = oracle_lstsq(j, {0, 1}, 2);
  CHECK(oracle::rel_err(s2.x, want) <= 1e-9);
  CHECK(s2.residual == doctest::Approx(oracle_residual(j, {0, 1}, 2, want)).epsilon(1e-9));
}

TEST_CASE("exact solver: orthogonal columns decouple, singular grams fall back to least squares") {
  MatrixXd v(4, 4);
  v << 1, 1, 1, 3 + 2 + 1,  //
      1, -1, 1, 3 - 2 - 1,  //
      -1, 1, 1, -3 + 2 - 1, //
      -1, -1, 1, -3 - 2 + 1;
  const auto q = make_query({make_table("T", {"x1", "x2", "one", "b"}, v)});
  const auto s = solve_exact_faq(q, {0, 1}, 3);
  CHECK(s.x(0) == doctest::Approx(3.0));
  CHECK(s.x(1) == doctest::Approx(2.0));
  CHECK(s.residual == doctest::Approx(2.0));

  // Duplicate feature: singular gram. Any least-squares solution gives the
  // optimal residual.
  const auto dup = solve_exact_faq(q, {0, 0, 1}, 3);
  CHECK(dup.residual == doctest::Approx(2.0));
}

TEST_CASE("solve_regression on the example join matches the normal equations") {
  const auto join = example_join();
  const MatrixXd j = materialize_join(join);
  const double best = oracle_residual(j, {0, 1}, 2, oracle_lstsq(j, {0, 1}, 2));
  const auto s = solve_regression(problem(join, {0, 1}, 2, 0.01, 3));
  CHECK(s.residual <= best * (1 + 1e-6));
  CHECK(s.residual == doctest::Approx(oracle_residual(j, {0, 1}, 2, s.x)).epsilon(1e-9));
}

TEST_CASE("solve_regression: consistent system is solved to machine precision") {
  std::mt19937_64 gen(29);
  auto a = oracle::random_table("A", {"k"}, {"x0", "x1"}, 200, 10, gen);
  auto b = oracle::random_table("B", {"k"}, {"y0", "y1", "t"}, 150, 10, gen);
  for (Index r = 0; r < b.rows(); ++r) b.values(r, 3) = 2.0 * b.values(r, 1) - 0.5 * b.values(r, 2);
  const auto join = make_two_table_join(a, b, {"k"});
  const Index t = join.partition.column("t");
  const std::vector<Index> u = {join.partition.column("x0"), join.partition.column("y0"), join.partition.column("y1")};
  const auto s = solve_regression(problem(join, u, t, 1e-6, 5));
  const double bnorm = std::sqrt(implicit_quadratic(join, VectorXd::Unit(join.dim(), t)));
  CHECK(s.residual <= 1e-9 * bnorm);
  CHECK(s.x(1) == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("solve_regression: (1 + eps) guarantee, exact optimality and GD contraction") {
  int within = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto join = keyed_join(120, 90, 6 + static_cast<int>(seed % 10), 3, 2, 100 + seed);
    const Index d = join.dim();
    std::vector<Index> u;
    for (Index c = 0; c < d - 1; ++c) u.push_back(c);
    const double eps = 0.05;
    const auto exact = solve_exact_faq(problem(join, u, d - 1, eps, seed));
    const auto s = solve_regression(problem(join, u, d - 1, eps, seed));
    within += s.residual <= (1 + eps) * exact.residual;
    CHECK(exact.residual <= s.residual * (1 + 1e-12));
    CHECK(s.status != SolveStatus::diverged);

    // Excess squared residual halves at least every 10 iterations.
    const double opt2 = exact.residual * exact.residual;
    for (std::size_t i = 0; i + 10 < s.history.size(); ++i) {
      const double e0 = s.history[i] * s.history[i] - opt2, e1 = s.history[i + 10] * s.history[i + 10] - opt2;
      if (e0 <= 1e-10 * opt2) break;
      CHECK(e1 <= 0.5 * e0);
    }
  }
  CHECK(within >= 27);
}

TEST_CASE("solve_regression: rank-deficient features") {
  const auto join = keyed_join(80, 60, 5, 2, 2, 3);
  const Index d = join.dim();
  const auto exact = solve_exact_faq(problem(join, {1, 1, 2}, d - 1, 0.1, 1));
  const auto s = solve_regression(problem(join, {1, 1, 2}, d - 1, 0.1, 1));
  CHECK(s.rank == 2);
  CHECK(s.residual <= 1.1 * exact.residual);
}

TEST_CASE("ridge: limits, lambda = 0 reduction and errors") {
  const auto join = keyed_join(60, 50, 4, 2, 2, 9);
  const auto q = query_from_join(join);
  const Index d = q.dim();
  const std::vector<Index> u = {0, 1, 2, 3};
  const auto exact = solve_exact_faq(q, u, d - 1);
  const auto r0 = solve_ridge_exact(q, u, d - 1, 0.0);
  CHECK(oracle::rel_err(r0.x, exact.x) <= 1e-9);
  const auto big = solve_ridge_exact(q, u, d - 1, 1e12);
  CHECK(big.x.norm() <= 1e-6);
  const auto sk0 = solve_ridge_sketched(q, u, d - 1, 0.0, 0.5, Seed{4});
  CHECK(sk0.objective <= 1.5 * exact.objective);
  const auto sk_big = solve_ridge_sketched(q, u, d - 1, 1e12, 0.5, Seed{4});
  CHECK(sk_big.x.norm() <= 1e-6);
  CHECK_THROWS_AS(solve_ridge_exact(q, u, d - 1, -1.0), ConfigError);
  CHECK_THROWS_AS(solve_ridge_sketched(q, u, d - 1, -1.0, 0.5, Seed{4}), ConfigError);
  CHECK_THROWS_AS(ridge_from_sketch(MatrixXd::Zero(3, d), u, d - 1, -1.0), ConfigError);

  const auto two = solve_ridge_sketched(problem(join, u, d - 1, 0.1, 2), 0.0);
  CHECK(two.objective <= 1.5 * exact.objective);
}

TEST_CASE("ridge relative error on a fixed sketch does not grow with lambda") {
  std::mt19937_64 gen(61);
  const auto a = oracle::random_table("A", {"k1"}, {"a1", "a2"}, 60, 6, gen);
  const auto b = oracle::random_table("B", {"k1", "k2"}, {"b1"}, 40, 6, gen);
  const auto c = oracle::random_table("C", {"k2"}, {"c1"}, 50, 6, gen);
  const auto q = make_query({a, b, c});
  const std::vector<Index> u = {1, 2, 4};
  const Index target = q.partition.column("c1");
  const MatrixXd sj = general_ridge_sketch(q, 0.5, 0.0, Seed{12}, 60);
  double prev = std::numeric_limits<double>::infinity();
  for (const double lambda : {0.0, 1.0, 10.0, 100.0, 1000.0, 1e4, 1e5}) {
    const auto ex = solve_ridge_exact(q, u, target, lambda);
    const VectorXd x = ridge_from_sketch(sj, u, target, lambda);
    const double err = (ridge_objective(q, u, target, x, lambda) - ex.objective) / ex.objective;
    CHECK(err >= -1e-9);
    CHECK(err <= prev + 1e-12);
    prev = err;
  }
}
