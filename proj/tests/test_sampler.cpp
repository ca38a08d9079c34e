#include "joinsketch/sampler.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace joinsketch;

namespace {

TwoTableJoin example_join() { return make_two_table_join(oracle::example_t1(), oracle::example_t2(), {"f2"}); }

TwoTableJoin random_join(std::mt19937_64& gen, Index nmax, Index dmax) {
  const Index n1 = 1 + static_cast<Index>(gen() % static_cast<std::uint64_t>(nmax));
  const Index n2 = 1 + static_cast<Index>(gen() % static_cast<std::uint64_t>(nmax));
  const int card = 1 + static_cast<int>(gen() % 6);
  const Index f1 = 1 + static_cast<Index>(gen() % static_cast<std::uint64_t>(dmax / 2));
  const Index f2 = 1 + static_cast<Index>(gen() % static_cast<std::uint64_t>(dmax / 2));
  std::vector<std::string> c1, c2;
  for (Index i = 0; i < f1; ++i) c1.push_back("a" + std::to_string(i));
  for (Index i = 0; i < f2; ++i) c2.push_back("b" + std::to_string(i));
  return make_two_table_join(oracle::random_table("A", {"k"}, c1, n1, card, gen),
                             oracle::random_table("B", {"k"}, c2, n2, card, gen), {"k"});
}

MatrixXd random_y(Index d, Index r, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  MatrixXd y(d, r);
  for (Index i = 0; i < y.size(); ++i) y.data()[i] = nd(gen);
  return y;
}

}  // namespace

TEST_CASE("leaf vectors multiply to the squared row norm") {
  RowVectorXd a(3), b(3);
  a << 1, -2, 0.5;
  b << 3, 0.25, -1;
  CHECK(leaf_vector_t1(a).dot(leaf_vector_t2(b)) == doctest::Approx((a + b).squaredNorm()).epsilon(1e-14));
}

TEST_CASE("example join with Y = I") {
  const auto join = example_join();
  const SamplerForest f(join, MatrixXd::Identity(3, 3));
  CHECK(f.total() == doctest::Approx(46));
  const double want[] = {3, 6, 6, 9, 22};
  for (std::int64_t r = 0; r < 5; ++r) CHECK(f.row_mass(locate_row(join.index, r)) == doctest::Approx(want[r]));
  const auto rows = f.enumerate_nonzero();
  CHECK(rows.size() == 5);
  CHECK(f.tree_defect() == 0);
}

TEST_CASE("Y = 0 gives zero mass and no rows") {
  const auto join = example_join();
  const SamplerForest f(join, MatrixXd::Zero(3, 2));
  CHECK(f.total() == 0);
  CHECK(f.enumerate_nonzero().empty());
  Rng rng(Seed{1});
  CHECK_THROWS_AS(f.sample(rng), AlgorithmError);
}

TEST_CASE("single-row join: total is the row norm, sample has p = 1") {
  MatrixXd a(1, 2), b(1, 2);
  a << 4, 1.5;
  b << 4, -2;
  const auto join = make_two_table_join(make_table("A", {"k", "x"}, a), make_table("B", {"k", "y"}, b), {"k"});
  const SamplerForest f(join, MatrixXd::Identity(3, 3));
  CHECK(f.total() == doctest::Approx(16 + 2.25 + 4));
  Rng rng(Seed{3});
  const auto s = f.sample(rng);
  CHECK(s.id == JoinRowId{0, 0, 0});
  CHECK(s.p == doctest::Approx(1.0));
}

TEST_CASE("identical rows get identical probabilities") {
  MatrixXd a(2, 2), b(1, 2);
  a << 1, 0.5, 1, 0.5;
  b << 1, 2;
  const auto join = make_two_table_join(make_table("A", {"k", "x"}, a), make_table("B", {"k", "y"}, b), {"k"});
  const SamplerForest f(join, MatrixXd::Identity(3, 3));
  CHECK(f.probability({0, 0, 0}) == f.probability({0, 1, 0}));
}

TEST_CASE("kernel vector of one block hides only that block") {
  const auto join = example_join();
  // Block 2's single row is (3, 2, 3); y is orthogonal to it but not to block 1's rows.
  VectorXd y(3);
  y << 1, 0, -1;
  const SamplerForest f(join, MatrixXd(y));
  const auto rows = f.enumerate_nonzero();
  for (const auto& w : rows) CHECK(w.id.block == 0);
  CHECK(rows.size() == 2);  // (1,1,2) and (2,1,1); the other two block-1 rows are orthogonal too
}

TEST_CASE("inner-product identity, tree sums and probability bookkeeping on random joins") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 80; ++trial) {
    const auto join = random_join(gen, 20, 6);
    const Index r = 1 + static_cast<Index>(gen() % 6);
    const MatrixXd y = random_y(join.dim(), r, gen);
    const SamplerForest f(join, y);
    const MatrixXd jy = materialize_join(join) * y;
    CHECK(f.total() == doctest::Approx(jy.squaredNorm()).epsilon(1e-9));
    CHECK(f.tree_defect() <= 1e-12 * std::max(1.0, f.total()));
    double psum = 0;
    for (std::int64_t row = 0; row < join.rows(); ++row) {
      const auto id = locate_row(join.index, row);
      CHECK(f.row_mass(id) == doctest::Approx(jy.row(row).squaredNorm()).epsilon(1e-9));
      psum += f.probability(id);
    }
    if (join.rows() > 0) {
      CHECK(psum == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(static_cast<std::int64_t>(f.enumerate_nonzero().size()) == join.rows());
      for (Index s = 0; s < f.block_count(); ++s) {
        const Index b = f.blocks()[static_cast<std::size_t>(s)];
        const auto lo = join.index.offsets[static_cast<std::size_t>(b)];
        const auto hi = join.index.offsets[static_cast<std::size_t>(b) + 1];
        CHECK(f.block_mass(s) == doctest::Approx(jy.middleRows(lo, hi - lo).squaredNorm()).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("block subset forest covers only its blocks") {
  const auto join = example_join();
  const SamplerForest f(join, {1}, MatrixXd::Identity(3, 3));
  CHECK(f.total() == doctest::Approx(22));
  Rng rng(Seed{8});
  for (int i = 0; i < 10; ++i) CHECK(f.sample(rng).id.block == 1);
}

TEST_CASE("empirical distribution on the example join") {
  const auto join = example_join();
  const SamplerForest f(join, MatrixXd::Identity(3, 3));
  Rng rng(Seed{77});
  std::vector<double> counts(5, 0);
  for (int i = 0; i < 100000; ++i) {
    const auto s = f.sample(rng);
    counts[static_cast<std::size_t>(global_row(join.index, s.id))] += 1;
    CHECK(s.p == doctest::Approx(f.probability(s.id)));
  }
  const double want[] = {3, 6, 6, 9, 22};
  double tv = 0;
  std::vector<double> p;
  for (int r = 0; r < 5; ++r) {
    tv += std::abs(counts[static_cast<std::size_t>(r)] / 1e5 - want[r] / 46);
    p.push_back(want[r] / 46);
  }
  CHECK(tv / 2 < 0.01);
  CHECK(oracle::chi_square_pvalue(counts, p) > 0.01);
}
