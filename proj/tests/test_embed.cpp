#include "joinsketch/embed.hpp"
#include "joinsketch/sketch.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace joinsketch;

namespace {

TwoTableJoin example_join() { return make_two_table_join(oracle::example_t1(), oracle::example_t2(), {"f2"}); }

// Tables A(k, x1..xa) and B(k, y1..yb) with keys drawn from [0, card).
TwoTableJoin keyed_join(Index n1, Index n2, int card, Index fa, Index fb, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<std::string> ca, cb;
  for (Index i = 0; i < fa; ++i) ca.push_back("x" + std::to_string(i));
  for (Index i = 0; i < fb; ++i) cb.push_back("y" + std::to_string(i));
  return make_two_table_join(oracle::random_table("A", {"k"}, ca, n1, card, gen),
                             oracle::random_table("B", {"k"}, cb, n2, card, gen), {"k"});
}

bool spectral_pass(const MatrixXd& exact_gram, const MatrixXd& sketch, double eps) {
  const auto [lo, hi] = oracle::spectral_range(exact_gram, sketch.transpose() * sketch);
  return lo >= (1 - eps) * (1 - eps) && hi <= (1 + eps) * (1 + eps);
}

// Generalized leverage of each row of `rows` with respect to the gram `g`.
VectorXd generalized_leverage(const MatrixXd& rows, const MatrixXd& g) {
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(g);
  const MatrixXd pinv = cod.pseudoInverse();
  return (rows * pinv * rows.transpose()).diagonal();
}

}  // namespace

TEST_CASE("embed_big: empty block list gives a zero-row matrix") {
  const auto join = example_join();
  const MatrixXd m = embed_big(join, {}, EmbedConfig{});
  CHECK(m.rows() == 0);
  CHECK(m.cols() == 3);
}

TEST_CASE("embed_big without compaction equals the block tensor sketch") {
  const auto join = keyed_join(40, 30, 1, 1, 1, 3);
  EmbedConfig cfg;
  cfg.compact = false;
  cfg.exact_shortcuts = false;
  cfg.seed = Seed{12};
  const MatrixXd got = embed_big(join, {0}, cfg);
  const Index d = join.dim();
  const Index t = static_cast<Index>(std::ceil(cfg.tensorsketch_factor * d * d / (cfg.epsilon * cfg.epsilon) - 1e-9));
  const TensorSketch ts(t, 2, cfg.seed.derive(6));
  const auto& blk = join.index.blocks[0];
  CHECK(got.rows() == t);
  CHECK(oracle::rel_err(got, ts.block(join.side1(0), join.side2(0), blk.rows1, blk.rows2)) < 1e-12);
}

TEST_CASE("embed_big: a 50 x 50 block is embedded at eps = 0.5") {
  int pass = 0;
  for (int s = 0; s < 20; ++s) {
    const auto join = keyed_join(50, 50, 1, 1, 1, 100 + s);
    EmbedConfig cfg;
    cfg.seed = Seed{static_cast<std::uint64_t>(s)};
    cfg.exact_shortcuts = false;
    const MatrixXd j = materialize_join(join);
    pass += spectral_pass(j.transpose() * j, embed_big(join, {0}, cfg), 0.5);
  }
  CHECK(pass >= 18);
}

TEST_CASE("embed_big output does not depend on the thread count") {
  const auto join = keyed_join(400, 300, 20, 2, 1, 7);
  EmbedConfig cfg;
  cfg.exact_shortcuts = false;
  cfg.epsilon = 0.9;
  const auto split = split_blocks(join.index, join.dim(), 1.0);
  REQUIRE(split.big.size() > 4);
  const MatrixXd one = embed_big(join, split.big, cfg);
  cfg.threads = 4;
  CHECK(embed_big(join, split.big, cfg) == one);
}

TEST_CASE("leverage: identical rows share one score, escaping rows score 1") {
  EmbedConfig cfg;
  // A single repeated row: every score is equal.
  MatrixXd c(1, 2), e(5, 2);
  c << 1, 2;
  e << 1, 3, 1, 3, 1, 3, 1, 3, 1, 3;
  const auto rep = make_two_table_join(make_table("A", {"k", "x"}, c), make_table("B", {"k", "y"}, e), {"k"});
  const auto rs = split_blocks(rep.index, rep.dim(), 10.0);
  const auto rm = estimate_leverage(rep, rs, cfg);
  CHECK(rm.rank() == 1);
  const double t0 = rm.tau(rep.row({0, 0, 0}));
  for (Index l = 1; l < 5; ++l) CHECK(rm.tau(rep.row({0, 0, l})) == doctest::Approx(t0));
  RowVectorXd off(3);
  off << 0, 1, 0;
  CHECK(rm.escapes(off));
}

namespace {

// Fraction of instances where tau~ is within a factor 3 of the exact
// generalized leverage for every non-escaping row.
std::pair<int, int> leverage_within_factor_3(double gaussian_factor) {
  int inside = 0, instances = 0;
  for (int s = 0; s < 40; ++s) {
    const auto join = keyed_join(30, 30, 10, 3, 2, 500 + s);
    const auto split = split_blocks(join.index, join.dim(), 1.0);
    if (split.n_small < 30) continue;
    EmbedConfig cfg;
    cfg.seed = Seed{static_cast<std::uint64_t>(s)};
    cfg.gaussian_factor = gaussian_factor;
    const auto model = estimate_leverage(join, split, cfg);
    // Re-draw the library's uniform sample from the same stream to get J~.
    const UniformRowSampler uniform(join.index, split.small);
    Rng rng(cfg.seed.derive(1));
    MatrixXd sample(model.sample_rows, join.dim());
    const double scale = std::sqrt(static_cast<double>(split.n_small) / static_cast<double>(model.sample_rows));
    for (Index i = 0; i < model.sample_rows; ++i) sample.row(i) = scale * join.row(uniform.draw(rng));
    const MatrixXd small = materialize_blocks(join, split.small);
    const VectorXd exact = generalized_leverage(small, sample.transpose() * sample);
    bool ok = true;
    for (Index i = 0; i < small.rows(); ++i) {
      if (model.escapes(small.row(i)) || exact(i) < 1e-12) continue;
      const double est = model.tau(small.row(i));
      ok = ok && est <= 3 * exact(i) && est >= exact(i) / 3;
    }
    ++instances;
    inside += ok;
  }
  return {inside, instances};
}

}  // namespace

TEST_CASE("leverage estimates track exact generalized leverage") {
  // tau~ is |row V Sigma^-1 G|^2 with an r x t_g Gaussian G, so its distortion
  // over all rows is set by the extreme singular values of G. For r = 6 the
  // default t_g = ceil(4 ln N) is too short for a uniform factor of 3; twelve
  // log factors (t_g ~ 55) put the Gaussian's edge inside [1/3, 3].
  const auto [wide, n_wide] = leverage_within_factor_3(12);
  REQUIRE(n_wide >= 20);
  CHECK(wide == n_wide);
  const auto [base, n_base] = leverage_within_factor_3(4);
  MESSAGE("default t_g: every row within factor 3 on " << base << " / " << n_base << " instances");
  CHECK(base * 2 >= n_base);
}

TEST_CASE("sample_small: zero small part and unbiasedness") {
  const auto empty = keyed_join(10, 10, 1, 1, 1, 1);
  const auto split0 = split_blocks(empty.index, empty.dim(), 1.0);
  REQUIRE(split0.n_small == 0);
  CHECK(sample_small(empty, split0, LeverageModel{}, EmbedConfig{}).rows.rows() == 0);

  const auto join = keyed_join(600, 600, 600, 2, 1, 11);
  const auto split = split_blocks(join.index, join.dim(), 1.0);
  const MatrixXd small = materialize_blocks(join, split.small);
  REQUIRE(small.rows() > 300);
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  std::vector<VectorXd> xs;
  for (int i = 0; i < 10; ++i) {
    VectorXd x(join.dim());
    for (Index c = 0; c < x.size(); ++c) x(c) = nd(gen);
    xs.push_back(x);
  }
  std::vector<double> mean(10, 0.0);
  Index drawn = 0;
  for (int s = 0; s < 200; ++s) {
    EmbedConfig cfg;
    cfg.epsilon = 0.9;
    cfg.seed = Seed{static_cast<std::uint64_t>(1000 + s)};
    const auto model = estimate_leverage(join, split, cfg);
    const auto sample = sample_small(join, split, model, cfg);
    drawn = sample.draws;
    for (int i = 0; i < 10; ++i) mean[static_cast<std::size_t>(i)] += (sample.rows * xs[static_cast<std::size_t>(i)]).squaredNorm() / 200;
  }
  REQUIRE(drawn < small.rows());
  for (int i = 0; i < 10; ++i) {
    const double want = (small * xs[static_cast<std::size_t>(i)]).squaredNorm();
    CHECK(std::abs(mean[static_cast<std::size_t>(i)] / want - 1) < 0.05);
  }
}

TEST_CASE("sample_small: a single distinct row repeated") {
  MatrixXd a(1, 2), b(40, 2);
  a << 1, 2;
  for (Index i = 0; i < 40; ++i) b.row(i) << 1, 3;
  const auto join = make_two_table_join(make_table("A", {"k", "x"}, a), make_table("B", {"k", "y"}, b), {"k"});
  EmbedConfig cfg;
  cfg.sample_factor = 0.5;
  const auto split = split_blocks(join.index, join.dim(), 100.0);
  const auto model = estimate_leverage(join, split, cfg);
  const auto s = sample_small(join, split, model, cfg);
  REQUIRE(s.draws < 40);
  CHECK(s.escape_rows == 0);
  for (const double w : s.weights) CHECK(w == doctest::Approx(s.weights[0]));
  const MatrixXd j = materialize_join(join);
  CHECK(oracle::rel_err(s.rows.transpose() * s.rows, j.transpose() * j) < 1e-9);
}

TEST_CASE("subspace_embed on the example join") {
  const auto join = example_join();
  const MatrixXd j = materialize_join(join);
  int pass = 0;
  for (int s = 0; s < 100; ++s) {
    EmbedConfig cfg;
    cfg.seed = Seed{static_cast<std::uint64_t>(s)};
    pass += spectral_pass(j.transpose() * j, subspace_embed(join, cfg).matrix, 0.5);
  }
  CHECK(pass >= 90);
}

TEST_CASE("subspace_embed: empty join and exact regime") {
  MatrixXd a(1, 2), b(1, 2);
  a << 1, 2;
  b << 2, 3;
  const auto none = make_two_table_join(make_table("A", {"k", "x"}, a), make_table("B", {"k", "y"}, b), {"k"});
  CHECK(subspace_embed(none, EmbedConfig{}).rows() == 0);

  const auto join = keyed_join(60, 60, 12, 2, 2, 3);
  const auto e = subspace_embed(join, EmbedConfig{});
  CHECK(e.small.exact);
  const MatrixXd j = materialize_join(join);
  CHECK(spectral_pass(j.transpose() * j, e.matrix, 0.5));
}

TEST_CASE("subspace_embed: big and small parts decompose the gram") {
  const auto join = keyed_join(300, 200, 40, 2, 1, 21);
  EmbedConfig cfg;
  cfg.epsilon = 0.5;
  const auto e = subspace_embed(join, cfg);
  const auto split = split_blocks(join.index, join.dim(), e.gamma);
  REQUIRE(!split.big.empty());
  REQUIRE(!split.small.empty());
  CHECK(e.big_rows + e.small.rows.rows() == e.rows());
  for (const auto& id : e.small.ids) CHECK(std::find(split.small.begin(), split.small.end(), id.block) != split.small.end());

  const MatrixXd jb = materialize_blocks(join, split.big);
  const MatrixXd js = materialize_blocks(join, split.small);
  // Exact small rows plus the big sketch reproduce the small gram term exactly.
  MatrixXd mixed(e.big_rows + js.rows(), join.dim());
  mixed << e.big_part(), js;
  const MatrixXd big_gram = e.big_part().transpose() * e.big_part();
  CHECK(oracle::rel_err(mixed.transpose() * mixed - big_gram, js.transpose() * js) < 1e-9);
  const MatrixXd full = materialize_join(join);
  CHECK(spectral_pass(jb.transpose() * jb, e.big_part(), 0.5));
  CHECK(spectral_pass(full.transpose() * full, e.matrix, 0.5));
}

TEST_CASE("subspace_embed: leverage sum bound and determinism") {
  const auto join = keyed_join(800, 800, 700, 2, 1, 31);
  EmbedConfig cfg;
  cfg.epsilon = 0.8;
  cfg.seed = Seed{4};
  const auto e = subspace_embed(join, cfg);
  REQUIRE(!e.small.exact);
  const double d = static_cast<double>(join.dim());
  CHECK(e.small.leverage_sum <= 4 * d * d * e.gamma * e.gamma);
  CHECK(subspace_embed(join, cfg).matrix == e.matrix);
  const MatrixXd full = materialize_join(join);
  CHECK(spectral_pass(full.transpose() * full, e.matrix, 0.8));
}
