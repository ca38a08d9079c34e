#include "joinsketch/embed.hpp"

#include "joinsketch/sketch.hpp"

#include "util.hpp"

#include <fmt/format.h>

#include <Eigen/SVD>

#include <cmath>
#include <unordered_set>

namespace joinsketch {

namespace {

enum Stream : std::uint64_t {
  kUniform = 1,
  kOsnap = 2,
  kGaussianMatrix = 3,
  kGaussianVector = 4,
  kDraws = 5,
  kTensor = 6,
  kCompact = 7,
};

using detail::ceil_index;
using detail::parallel_for;
using detail::Stopwatch;

Index alpha_draws(const EmbedConfig& cfg, Index d, double gamma) {
  const double dd = static_cast<double>(d);
  return std::max<Index>(1, ceil_index(cfg.sample_factor * dd * dd * gamma * gamma * std::log(dd + 1) /
                                       (cfg.epsilon * cfg.epsilon)));
}

}  // namespace

double EmbedConfig::resolved_gamma(Index d) const {
  if (gamma) return *gamma;
  return mode == Mode::dense ? 1.0 : static_cast<double>(d);
}

void EmbedConfig::validate() const {
  if (!(epsilon > 0 && epsilon < 1)) throw ConfigError(fmt::format("epsilon must lie in (0, 1), got {}", epsilon));
  if (gamma && !(*gamma >= 1)) throw ConfigError("gamma must be at least 1");
  if (osnap_nnz < 1) throw ConfigError("OSNAP needs at least one nonzero per column");
  if (countsketch_rows && *countsketch_rows <= 0) throw ConfigError("countsketch rows must be positive");
  for (const double c : {countsketch_factor, tensorsketch_factor, osnap_factor, uniform_factor, sample_factor,
                         gaussian_factor})
    if (!(c > 0)) throw ConfigError("sketch size factors must be positive");
  if (threads < 1) throw ConfigError("thread count must be at least 1");
}

// ---------------------------------------------------------------------------

bool LeverageModel::escapes(const RowVectorXd& row) const {
  return std::abs(row.dot(escape)) > 1e-9 * row.norm() * g.norm();
}

double LeverageModel::tau(const RowVectorXd& row) const {
  if (escapes(row)) return 1.0;
  return rank() == 0 ? 0.0 : (row * projection).squaredNorm();
}

LeverageModel estimate_leverage(const TwoTableJoin& join, const BlockSplit& split, const EmbedConfig& cfg) {
  if (split.n_small <= 0) throw AlgorithmError("leverage estimation needs a nonempty small part");
  const Index d = join.dim();
  const double gamma = cfg.resolved_gamma(d);
  const double m_target = cfg.uniform_factor * static_cast<double>(join.index.n1 + join.index.n2) / gamma;
  const Index m = static_cast<Index>(std::min<double>(static_cast<double>(split.n_small), std::ceil(m_target)));

  LeverageModel model;
  model.sample_rows = m;
  const UniformRowSampler uniform(join.index, split.small);
  Rng rng(cfg.seed.derive(kUniform));
  MatrixXd sample(m, d);
  const double scale = std::sqrt(static_cast<double>(split.n_small) / static_cast<double>(m));
  for (Index i = 0; i < m; ++i) sample.row(i) = scale * join.row(uniform.draw(rng));

  const Index t = ceil_index(cfg.osnap_factor * static_cast<double>(d) / (cfg.epsilon * cfg.epsilon));
  MatrixXd sketched;
  if (cfg.exact_shortcuts && m <= t) {
    sketched = std::move(sample);
  } else {
    const OsnapSketch w(t, m, std::min(cfg.osnap_nnz, t), cfg.seed.derive(kOsnap));
    sketched = w.apply(sample);
  }
  model.sketch_rows = sketched.rows();

  const Eigen::BDCSVD<MatrixXd> svd(sketched, Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  Index r = 0;
  while (r < sv.size() && sv(r) > 1e-12 * sv(0)) ++r;
  model.v = svd.matrixV().leftCols(r);
  model.sigma = sv.head(r);

  const Index tg = std::max<Index>(1, ceil_index(cfg.gaussian_factor * std::log(static_cast<double>(split.n_small))));
  if (r > 0) {
    const GaussianSketch gm(r, tg, cfg.seed.derive(kGaussianMatrix));
    model.projection = model.v * model.sigma.cwiseInverse().asDiagonal() * gm.matrix();
  } else {
    model.projection = MatrixXd::Zero(d, 0);
  }
  model.g = gaussian_vector(d, cfg.seed.derive(kGaussianVector));
  model.escape = model.g - model.v * (model.v.transpose() * model.g);
  return model;
}

// ---------------------------------------------------------------------------

SmallSample sample_small(const TwoTableJoin& join, const BlockSplit& split, const LeverageModel& model,
                         const EmbedConfig& cfg) {
  const Index d = join.dim();
  SmallSample out;
  out.rows = MatrixXd(0, d);
  if (split.n_small == 0) {
    out.exact = true;
    return out;
  }
  out.draws = alpha_draws(cfg, d, cfg.resolved_gamma(d));

  // Rows with a component outside the sampled span are kept with p = 1.
  // Candidates come from a pruned search whose floor sits above the
  // cancellation noise of the squared-sum encoding; each candidate is then
  // tested exactly.
  std::unordered_set<std::int64_t> escaping;
  std::vector<JoinRowId> escape_ids;
  if (model.escape.norm() > 0) {
    const SamplerForest esc(join, split.small, MatrixXd(model.escape));
    double scale = 0;
    for (const Index b : split.small) {
      scale = std::max(scale, join.side1(b).rowwise().squaredNorm().maxCoeff());
      scale = std::max(scale, join.side2(b).rowwise().squaredNorm().maxCoeff());
    }
    const double floor = 1e-14 * scale * model.g.squaredNorm();
    for (const auto& w : esc.enumerate_nonzero(floor)) {
      if (!model.escapes(join.row(w.id))) continue;
      escaping.insert(global_row(join.index, w.id));
      escape_ids.push_back(w.id);
    }
  }
  out.escape_rows = static_cast<Index>(escape_ids.size());

  std::vector<RowVectorXd> rows;
  if (model.rank() > 0) {
    const SamplerForest lev(join, split.small, model.projection);
    double escape_mass = 0;
    for (const auto& id : escape_ids) escape_mass += lev.row_mass(id);
    out.leverage_sum = lev.total() - escape_mass;
    if (lev.total() > 0) {
      Rng rng(cfg.seed.derive(kDraws));
      for (Index i = 0; i < out.draws; ++i) {
        const SampledRow s = lev.sample(rng);
        if (escaping.count(global_row(join.index, s.id))) continue;
        const double w = 1.0 / std::sqrt(static_cast<double>(out.draws) * s.p);
        rows.push_back(w * join.row(s.id));
        out.ids.push_back(s.id);
        out.weights.push_back(w);
      }
    }
  }
  for (const auto& id : escape_ids) {
    rows.push_back(join.row(id));
    out.ids.push_back(id);
    out.weights.push_back(1.0);
  }
  out.rows.resize(static_cast<Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) out.rows.row(static_cast<Index>(i)) = rows[i];
  return out;
}

// ---------------------------------------------------------------------------

MatrixXd embed_big(const TwoTableJoin& join, const std::vector<Index>& big_blocks, const EmbedConfig& cfg) {
  const Index d = join.dim();
  if (big_blocks.empty()) return MatrixXd(0, d);
  const double e2 = cfg.epsilon * cfg.epsilon;
  const double dd = static_cast<double>(d);
  const Index t = ceil_index(cfg.tensorsketch_factor * dd * dd / e2);
  const Index k = cfg.countsketch_rows.value_or(ceil_index(cfg.countsketch_factor * dd * dd / e2));
  const TensorSketch ts(t, 2, cfg.seed.derive(kTensor));

  const auto nb = static_cast<Index>(big_blocks.size());
  std::vector<bool> exact(static_cast<std::size_t>(nb));
  std::vector<Index> offset(static_cast<std::size_t>(nb) + 1, 0);
  for (Index p = 0; p < nb; ++p) {
    const std::int64_t s = join.index.blocks[static_cast<std::size_t>(big_blocks[static_cast<std::size_t>(p)])].size();
    exact[static_cast<std::size_t>(p)] = cfg.exact_shortcuts && s <= t;
    offset[static_cast<std::size_t>(p) + 1] =
        offset[static_cast<std::size_t>(p)] + (exact[static_cast<std::size_t>(p)] ? static_cast<Index>(s) : t);
  }
  const Index stacked = offset.back();

  const auto sketch_block = [&](Index p) -> MatrixXd {
    const Index b = big_blocks[static_cast<std::size_t>(p)];
    const Block& blk = join.index.blocks[static_cast<std::size_t>(b)];
    if (exact[static_cast<std::size_t>(p)]) return kronecker_block(join.side1(b), join.side2(b));
    return ts.block(join.side1(b), join.side2(b), blk.rows1, blk.rows2);
  };

  const bool compact = cfg.compact && !(cfg.exact_shortcuts && stacked <= k);
  if (!compact) {
    MatrixXd out(stacked, d);
    parallel_for(nb, cfg.threads, [&](Index p) {
      out.middleRows(offset[static_cast<std::size_t>(p)], offset[static_cast<std::size_t>(p) + 1] - offset[static_cast<std::size_t>(p)]) =
          sketch_block(p);
    });
    return out;
  }

  // Blocks are sketched in parallel windows and folded into the compacted
  // output in block order, so the result does not depend on the thread count.
  const CountSketch cs(k, stacked, cfg.seed.derive(kCompact));
  MatrixXd out = MatrixXd::Zero(k, d);
  const Index window = std::max<Index>(16, 4 * cfg.threads);
  std::vector<MatrixXd> buffer(static_cast<std::size_t>(window));
  for (Index start = 0; start < nb; start += window) {
    const Index count = std::min(window, nb - start);
    parallel_for(count, cfg.threads, [&](Index i) { buffer[static_cast<std::size_t>(i)] = sketch_block(start + i); });
    for (Index i = 0; i < count; ++i) {
      const MatrixXd& part = buffer[static_cast<std::size_t>(i)];
      const Index base = offset[static_cast<std::size_t>(start + i)];
      for (Index r = 0; r < part.rows(); ++r) out.row(cs.bucket(base + r)) += cs.sign(base + r) * part.row(r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Embedding subspace_embed(const TwoTableJoin& join, const EmbedConfig& cfg) {
  cfg.validate();
  const Index d = join.dim();
  Embedding e;
  e.gamma = cfg.resolved_gamma(d);
  e.join_rows = join.rows();
  Stopwatch clock;

  const BlockSplit split = split_blocks(join.index, d, e.gamma);
  e.big_blocks = static_cast<Index>(split.big.size());
  e.small_blocks = static_cast<Index>(split.small.size());
  e.n_small = split.n_small;
  e.phases.push_back({"split", clock.lap(), static_cast<std::int64_t>(join.index.n1 + join.index.n2)});

  std::int64_t big_touched = 0;
  for (const Index b : split.big) {
    const Block& blk = join.index.blocks[static_cast<std::size_t>(b)];
    big_touched += (blk.size1() + blk.size2()) * d;
  }
  const MatrixXd big = embed_big(join, split.big, cfg);
  e.phases.push_back({"big", clock.lap(), big_touched});

  const Index alpha = alpha_draws(cfg, d, e.gamma);
  if (split.n_small > 0 && !(cfg.exact_shortcuts && split.n_small <= alpha)) {
    const LeverageModel model = estimate_leverage(join, split, cfg);
    e.phases.push_back({"leverage", clock.lap(), model.sample_rows * d});
    e.small = sample_small(join, split, model, cfg);
    e.phases.push_back({"sample", clock.lap(), static_cast<std::int64_t>(e.small.rows.rows()) * d});
  } else {
    e.small.rows = materialize_blocks(join, split.small);
    e.small.exact = true;
    e.small.draws = 0;
    e.small.weights.assign(static_cast<std::size_t>(e.small.rows.rows()), 1.0);
    for (const Index b : split.small) {
      const Block& blk = join.index.blocks[static_cast<std::size_t>(b)];
      for (Index l1 = 0; l1 < blk.size1(); ++l1)
        for (Index l2 = 0; l2 < blk.size2(); ++l2) e.small.ids.push_back({b, l1, l2});
    }
    e.phases.push_back({"small-exact", clock.lap(), split.n_small * d});
  }

  e.big_rows = big.rows();
  e.matrix.resize(big.rows() + e.small.rows.rows(), d);
  e.matrix.topRows(big.rows()) = big;
  e.matrix.bottomRows(e.small.rows.rows()) = e.small.rows;
  return e;
}

}  // namespace joinsketch
