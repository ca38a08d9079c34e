#include "joinsketch/regression.hpp"

#include "joinsketch/dbsketch.hpp"
#include "joinsketch/faq.hpp"
#include "joinsketch/sketch.hpp"

#include "util.hpp"

#include <fmt/format.h>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace joinsketch {

namespace {

using detail::ceil_index;
using detail::parallel_for;
using detail::Stopwatch;

constexpr Index kChunk = 64;

enum Stream : std::uint64_t {
  kEmbedding = 1,
  kResketch = 2,
};

/// Sums fn(block) over all blocks in fixed chunks, in block order.
template <class T, class Fn>
T reduce_blocks(const TwoTableJoin& join, int threads, T zero, Fn&& fn) {
  const Index nb = join.index.size();
  const Index chunks = (nb + kChunk - 1) / kChunk;
  std::vector<T> partial(static_cast<std::size_t>(chunks), zero);
  parallel_for(chunks, threads, [&](Index c) {
    T acc = zero;
    for (Index b = c * kChunk; b < std::min(nb, (c + 1) * kChunk); ++b) acc += fn(b);
    partial[static_cast<std::size_t>(c)] = acc;
  });
  T total = zero;
  for (const auto& p : partial) total += p;
  return total;
}

MatrixXd select_columns(const MatrixXd& m, const std::vector<Index>& cols) {
  MatrixXd out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = m.col(cols[i]);
  return out;
}

void check_columns(Index d, const std::vector<Index>& features, Index target) {
  if (features.empty()) throw ConfigError("regression needs at least one feature column");
  for (const Index c : features)
    if (c < 0 || c >= d) throw ConfigError(fmt::format("feature column {} is out of range [0, {})", c, d));
  if (target < 0 || target >= d) throw ConfigError(fmt::format("target column {} is out of range [0, {})", target, d));
  if (std::find(features.begin(), features.end(), target) != features.end())
    throw ConfigError("the target column must not be one of the features");
}

/// Least squares min ||a x - b|| with the SVD; minimum norm on rank deficiency.
VectorXd svd_solve(const MatrixXd& a, const VectorXd& b) {
  Eigen::BDCSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  return svd.solve(b);
}

/// Solves the symmetric system g x = c; SVD least squares when g is singular.
VectorXd symmetric_solve(const MatrixXd& g, const VectorXd& c) {
  if (g.size() == 0) return VectorXd::Zero(0);
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (top > 0 && eig.eigenvalues().minCoeff() > 1e-12 * top) {
    const Eigen::LLT<MatrixXd> llt(g);
    if (llt.info() == Eigen::Success) return llt.solve(c);
  }
  return svd_solve(g, c);
}

}  // namespace

// --- implicit products --------------------------------------------------------

RowVectorXd implicit_gram_product(const TwoTableJoin& join, const VectorXd& w, const std::vector<Index>& columns,
                                  int threads) {
  const Index d = join.dim();
  require_dims(w.size() == d, fmt::format("implicit_gram_product: w has length {}, join dimension is {}", w.size(), d));
  for (const Index c : columns)
    require_dims(c >= 0 && c < d, fmt::format("implicit_gram_product: column {} out of range", c));
  const VectorXd a = join.padded1 * w, b = join.padded2 * w;
  const RowVectorXd full = reduce_blocks(join, threads, RowVectorXd(RowVectorXd::Zero(d)), [&](Index blk) {
    const Block& bl = join.index.blocks[static_cast<std::size_t>(blk)];
    RowVectorXd sa = RowVectorXd::Zero(d), saw = RowVectorXd::Zero(d), sb = RowVectorXd::Zero(d),
                sbw = RowVectorXd::Zero(d);
    double ta = 0, tb = 0;
    for (const Index r : bl.rows1) {
      sa += join.padded1.row(r);
      saw += a(r) * join.padded1.row(r);
      ta += a(r);
    }
    for (const Index r : bl.rows2) {
      sb += join.padded2.row(r);
      sbw += b(r) * join.padded2.row(r);
      tb += b(r);
    }
    const auto s1 = static_cast<double>(bl.size1()), s2 = static_cast<double>(bl.size2());
    return RowVectorXd(s2 * saw + s1 * sbw + ta * sb + tb * sa);
  });
  RowVectorXd out(static_cast<Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) out(static_cast<Index>(i)) = full(columns[i]);
  return out;
}

MatrixXd implicit_gram(const TwoTableJoin& join, int threads) {
  const Index d = join.dim();
  const MatrixXd g = reduce_blocks(join, threads, MatrixXd(MatrixXd::Zero(d, d)), [&](Index blk) {
    const Block& bl = join.index.blocks[static_cast<std::size_t>(blk)];
    MatrixXd aa = MatrixXd::Zero(d, d), bb = MatrixXd::Zero(d, d);
    VectorXd sa = VectorXd::Zero(d), sb = VectorXd::Zero(d);
    for (const Index r : bl.rows1) {
      aa.selfadjointView<Eigen::Lower>().rankUpdate(join.padded1.row(r).transpose());
      sa += join.padded1.row(r).transpose();
    }
    for (const Index r : bl.rows2) {
      bb.selfadjointView<Eigen::Lower>().rankUpdate(join.padded2.row(r).transpose());
      sb += join.padded2.row(r).transpose();
    }
    const auto s1 = static_cast<double>(bl.size1()), s2 = static_cast<double>(bl.size2());
    MatrixXd lower = s2 * aa + s1 * bb;
    MatrixXd out = lower.selfadjointView<Eigen::Lower>();
    out += sa * sb.transpose() + sb * sa.transpose();
    return out;
  });
  return g;
}

double implicit_quadratic(const TwoTableJoin& join, const VectorXd& w, int threads) {
  require_dims(w.size() == join.dim(), "implicit_quadratic: w length differs from the join dimension");
  const VectorXd a = join.padded1 * w, b = join.padded2 * w;
  return reduce_blocks(join, threads, 0.0, [&](Index blk) {
    const Block& bl = join.index.blocks[static_cast<std::size_t>(blk)];
    const auto s1 = static_cast<double>(bl.size1()), s2 = static_cast<double>(bl.size2());
    double ma = 0, mb = 0;
    for (const Index r : bl.rows1) ma += a(r);
    for (const Index r : bl.rows2) mb += b(r);
    ma /= s1;
    mb /= s2;
    double ca = 0, cb = 0;
    for (const Index r : bl.rows1) ca += (a(r) - ma) * (a(r) - ma);
    for (const Index r : bl.rows2) cb += (b(r) - mb) * (b(r) - mb);
    return s2 * ca + s1 * cb + s1 * s2 * (ma + mb) * (ma + mb);
  });
}

VectorXd residual_direction(Index d, const std::vector<Index>& features, Index target, const VectorXd& x) {
  require_dims(x.size() == static_cast<Index>(features.size()), "residual_direction: x length differs from |U|");
  VectorXd w = VectorXd::Zero(d);
  for (std::size_t i = 0; i < features.size(); ++i) w(features[i]) += x(static_cast<Index>(i));
  w(target) -= 1.0;
  return w;
}

// --- problem ------------------------------------------------------------------

void RegressionProblem::validate() const {
  if (join == nullptr) throw ConfigError("regression problem has no join");
  check_columns(join->dim(), features, target);
  if (!(epsilon > 0 && epsilon < 1)) throw ConfigError(fmt::format("epsilon must lie in (0, 1), got {}", epsilon));
  embed.validate();
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::exact: return "exact";
    case SolveStatus::converged: return "converged";
    case SolveStatus::iteration_cap: return "iteration_cap";
    case SolveStatus::diverged: return "diverged";
  }
  return "unknown";
}

Index regression_iteration_cap(double epsilon) {
  return 10 * std::max<Index>(1, static_cast<Index>(std::ceil(std::log2(1.0 / epsilon))));
}

// --- sketch-preconditioned solver ---------------------------------------------

Solution solve_regression(const RegressionProblem& p) {
  p.validate();
  const TwoTableJoin& join = *p.join;
  const Index d = join.dim();
  const auto u = static_cast<Index>(p.features.size());
  const int threads = p.embed.threads;
  Solution sol;
  sol.x = VectorXd::Zero(u);
  Stopwatch clock;

  EmbedConfig ecfg = p.embed;
  ecfg.seed = p.seed.derive(kEmbedding);
  const Embedding emb = subspace_embed(join, ecfg);
  for (const auto& ph : emb.phases) sol.phases.push_back({"embed/" + ph.phase, ph.seconds, ph.touched});
  sol.sketch_rows = emb.rows();
  clock.lap();
  if (emb.rows() == 0 || join.rows() == 0) {
    sol.status = SolveStatus::exact;
    return sol;
  }
  const MatrixXd eu = select_columns(emb.matrix, p.features);
  const VectorXd eb = emb.matrix.col(p.target);

  // Resketch to O(d) rows and take R from a pivoted QR.
  const double eps0 = ecfg.epsilon;
  const Index t = std::max(u, ceil_index(ecfg.osnap_factor * static_cast<double>(u) / (eps0 * eps0)));
  MatrixXd m = eu;
  if (eu.rows() > t) m = OsnapSketch(t, eu.rows(), std::min(ecfg.osnap_nnz, t), p.seed.derive(kResketch)).apply(eu);
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(m);
  const MatrixXd r_full = qr.matrixR().topRows(std::min(m.rows(), u)).triangularView<Eigen::Upper>();
  const double r00 = r_full.rows() > 0 ? std::abs(r_full(0, 0)) : 0.0;
  Index rank = 0;
  while (rank < r_full.rows() && std::abs(r_full(rank, rank)) > 1e-10 * r00) ++rank;
  sol.rank = rank;
  if (rank == 0) {
    sol.residual = std::sqrt(implicit_quadratic(join, residual_direction(d, p.features, p.target, sol.x), threads));
    sol.objective = sol.residual * sol.residual;
    sol.status = SolveStatus::exact;
    return sol;
  }
  const MatrixXd rr = r_full.topLeftCorner(rank, rank);
  std::vector<Index> kept, kept_cols;
  for (Index i = 0; i < rank; ++i) {
    kept.push_back(qr.colsPermutation().indices()(i));
    kept_cols.push_back(p.features[static_cast<std::size_t>(kept.back())]);
  }
  sol.phases.push_back({"precondition", clock.lap(), m.size()});

  // Warm start on the embedding, restricted to the kept columns.
  const VectorXd x0 = svd_solve(select_columns(eu, kept), eb);
  VectorXd z = rr.triangularView<Eigen::Upper>() * x0;
  const auto x_of = [&](const VectorXd& zz) {
    VectorXd x = VectorXd::Zero(u);
    const VectorXd xk = rr.triangularView<Eigen::Upper>().solve(zz);
    for (Index i = 0; i < rank; ++i) x(kept[static_cast<std::size_t>(i)]) = xk(i);
    return x;
  };
  VectorXd x = x_of(z);
  VectorXd w = residual_direction(d, p.features, p.target, x);
  double f = implicit_quadratic(join, w, threads);
  sol.history.push_back(std::sqrt(f));
  double best_f = f;
  VectorXd best_x = x;
  sol.phases.push_back({"warm_start", clock.lap(), eu.size()});

  const double eta = 2.0 / (1.0 / ((1 + eps0) * (1 + eps0)) + 1.0 / ((1 - eps0) * (1 - eps0)));
  const Index cap = regression_iteration_cap(p.epsilon);
  const double bnorm2 = implicit_quadratic(join, residual_direction(d, p.features, p.target, VectorXd::Zero(u)), threads);
  sol.status = SolveStatus::iteration_cap;
  int rises = 0;
  for (Index it = 0; it < cap; ++it) {
    if (f <= 1e-30 * bnorm2) {
      sol.status = SolveStatus::converged;
      break;
    }
    const VectorXd h = implicit_gram_product(join, w, kept_cols, threads).transpose();
    const VectorXd grad = rr.transpose().triangularView<Eigen::Lower>().solve(h);
    z -= eta * grad;
    x = x_of(z);
    w = residual_direction(d, p.features, p.target, x);
    const double f_new = implicit_quadratic(join, w, threads);
    ++sol.iterations;
    sol.history.push_back(std::sqrt(f_new));
    if (f_new < best_f) {
      best_f = f_new;
      best_x = x;
    }
    const double improvement = (f - f_new) / f;
    if (f_new > f * (1 + 1e-12)) {
      if (++rises >= 2) {
        sol.status = SolveStatus::diverged;
        break;
      }
    } else {
      rises = 0;
      if (improvement < std::numeric_limits<double>::epsilon()) {
        sol.status = SolveStatus::converged;
        f = f_new;
        break;
      }
    }
    f = f_new;
  }
  sol.phases.push_back({"descent", clock.lap(), static_cast<std::int64_t>(sol.iterations) * d *
                                                    (join.padded1.rows() + join.padded2.rows())});
  sol.x = best_x;
  sol.residual = std::sqrt(implicit_quadratic(join, residual_direction(d, p.features, p.target, best_x), threads));
  sol.objective = sol.residual * sol.residual;
  return sol;
}

// --- exact and ridge baselines ------------------------------------------------

Solution solve_exact_faq(const JoinQuery& q, const std::vector<Index>& features, Index target) {
  check_columns(q.dim(), features, target);
  Stopwatch clock;
  Solution sol;
  std::vector<Index> cols = features;
  cols.push_back(target);
  const auto g = gram_via_faq(q, cols);
  const auto u = static_cast<Index>(features.size());
  sol.phases.push_back({"gram", clock.lap(), g.evaluations});
  sol.x = symmetric_solve(g.gram.topLeftCorner(u, u), g.gram.col(u).head(u));
  sol.phases.push_back({"solve", clock.lap(), u * u});
  sol.objective = join_quadratic(q, residual_direction(q.dim(), features, target, sol.x));
  sol.residual = std::sqrt(sol.objective);
  sol.rank = u;
  sol.status = SolveStatus::exact;
  return sol;
}

Solution solve_exact_faq(const RegressionProblem& p) {
  if (p.join == nullptr) throw ConfigError("regression problem has no join");
  return solve_exact_faq(query_from_join(*p.join), p.features, p.target);
}

double ridge_objective(const JoinQuery& q, const std::vector<Index>& features, Index target, const VectorXd& x,
                       double lambda) {
  return join_quadratic(q, residual_direction(q.dim(), features, target, x)) + lambda * x.squaredNorm();
}

Solution solve_ridge_exact(const JoinQuery& q, const std::vector<Index>& features, Index target, double lambda) {
  if (!(lambda >= 0)) throw ConfigError(fmt::format("lambda must be >= 0, got {}", lambda));
  check_columns(q.dim(), features, target);
  Stopwatch clock;
  Solution sol;
  std::vector<Index> cols = features;
  cols.push_back(target);
  const auto g = gram_via_faq(q, cols);
  const auto u = static_cast<Index>(features.size());
  sol.phases.push_back({"gram", clock.lap(), g.evaluations});
  const MatrixXd a = g.gram.topLeftCorner(u, u) + lambda * MatrixXd::Identity(u, u);
  sol.x = symmetric_solve(a, g.gram.col(u).head(u));
  sol.phases.push_back({"solve", clock.lap(), u * u});
  sol.objective = ridge_objective(q, features, target, sol.x, lambda);
  sol.residual = std::sqrt(std::max(0.0, sol.objective - lambda * sol.x.squaredNorm()));
  sol.status = SolveStatus::exact;
  sol.rank = u;
  return sol;
}

VectorXd ridge_from_sketch(const MatrixXd& sj, const std::vector<Index>& features, Index target, double lambda) {
  if (!(lambda >= 0)) throw ConfigError(fmt::format("lambda must be >= 0, got {}", lambda));
  check_columns(sj.cols(), features, target);
  const MatrixXd su = select_columns(sj, features);
  const VectorXd sb = sj.col(target);
  if (lambda == 0) return svd_solve(su, sb);
  const auto u = static_cast<Index>(features.size());
  const MatrixXd a = su.transpose() * su + lambda * MatrixXd::Identity(u, u);
  return a.llt().solve(su.transpose() * sb);
}

Solution solve_ridge_sketched(const JoinQuery& q, const std::vector<Index>& features, Index target, double lambda,
                              double epsilon, Seed seed, std::optional<Index> k) {
  if (!(lambda >= 0)) throw ConfigError(fmt::format("lambda must be >= 0, got {}", lambda));
  check_columns(q.dim(), features, target);
  Stopwatch clock;
  Solution sol;
  const MatrixXd sj = general_ridge_sketch(q, epsilon, lambda, seed, k);
  sol.sketch_rows = sj.rows();
  sol.phases.push_back({"sketch", clock.lap(), sj.size()});
  sol.x = ridge_from_sketch(sj, features, target, lambda);
  sol.phases.push_back({"solve", clock.lap(), sj.rows() * static_cast<Index>(features.size())});
  sol.objective = ridge_objective(q, features, target, sol.x, lambda);
  sol.residual = std::sqrt(std::max(0.0, sol.objective - lambda * sol.x.squaredNorm()));
  sol.status = SolveStatus::exact;
  sol.rank = static_cast<Index>(features.size());
  return sol;
}

Solution solve_ridge_sketched(const RegressionProblem& p, double lambda) {
  if (!(lambda >= 0)) throw ConfigError(fmt::format("lambda must be >= 0, got {}", lambda));
  p.validate();
  Stopwatch clock;
  Solution sol;
  EmbedConfig ecfg = p.embed;
  ecfg.seed = p.seed.derive(kEmbedding);
  const Embedding emb = subspace_embed(*p.join, ecfg);
  for (const auto& ph : emb.phases) sol.phases.push_back({"embed/" + ph.phase, ph.seconds, ph.touched});
  sol.sketch_rows = emb.rows();
  clock.lap();
  sol.x = emb.rows() == 0 ? VectorXd::Zero(static_cast<Index>(p.features.size()))
                          : ridge_from_sketch(emb.matrix, p.features, p.target, lambda);
  sol.phases.push_back({"solve", clock.lap(), emb.matrix.size()});
  const double q = implicit_quadratic(*p.join, residual_direction(p.join->dim(), p.features, p.target, sol.x),
                                      p.embed.threads);
  sol.residual = std::sqrt(q);
  sol.objective = q + lambda * sol.x.squaredNorm();
  sol.status = SolveStatus::exact;
  sol.rank = static_cast<Index>(p.features.size());
  return sol;
}

}  // namespace joinsketch
