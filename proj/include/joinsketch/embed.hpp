#pragma once

// Subspace embedding of a two-table join. Big blocks are tensor-sketched and
// compacted with a CountSketch; rows of small blocks are sampled by
// approximate generalized leverage scores through the l2 sampler.

#include "joinsketch/join.hpp"
#include "joinsketch/sampler.hpp"
#include "joinsketch/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace joinsketch {

enum class Mode { dense, sparse };

struct EmbedConfig {
  double epsilon = 0.5;
  Mode mode = Mode::dense;
  /// Overrides the mode's gamma (1 for dense, d for sparse).
  std::optional<double> gamma;

  double countsketch_factor = 40;   // k_cs = c * d^2 / eps^2
  std::optional<Index> countsketch_rows;  // overrides k_cs
  double tensorsketch_factor = 40;  // rows per big-block tensor sketch, c * d^2 / eps^2
  double osnap_factor = 20;         // t = c * d / eps^2
  Index osnap_nnz = 8;
  double uniform_factor = 4;   // m = c * (n1 + n2) / gamma, capped at n_small
  double sample_factor = 8;    // alpha = c * d^2 gamma^2 log(d + 1) / eps^2
  double gaussian_factor = 4;  // t_g = ceil(c * ln N)

  /// CountSketch the stacked big-block sketches down to k_cs rows.
  bool compact = true;
  /// Use exact rows wherever the sketch would not be smaller than its input.
  bool exact_shortcuts = true;

  Seed seed{0};
  int threads = 1;

  double resolved_gamma(Index d) const;
  void validate() const;
};

struct PhaseTiming {
  std::string phase;
  double seconds = 0;
  std::int64_t touched = 0;  // matrix entries read
};

/// Generalized leverage-score machinery for the small blocks.
struct LeverageModel {
  MatrixXd v;           // d x r right singular vectors of the sketched sample
  VectorXd sigma;       // r singular values
  MatrixXd projection;  // d x t_g, V Sigma^-1 G
  VectorXd g;           // d, N(0, I)
  VectorXd escape;      // d, (I - V V^T) g
  Index sample_rows = 0;
  Index sketch_rows = 0;

  Index rank() const { return v.cols(); }
  /// alpha_i > 0 under the relative tolerance 1e-9 |row| |g|.
  bool escapes(const RowVectorXd& row) const;
  /// tau~_i: the squared norm of row * V Sigma^-1 G, or 1 for escaping rows.
  double tau(const RowVectorXd& row) const;
};

LeverageModel estimate_leverage(const TwoTableJoin& join, const BlockSplit& split, const EmbedConfig& cfg);

struct SmallSample {
  MatrixXd rows;                 // scaled rows, one per kept draw
  std::vector<JoinRowId> ids;
  std::vector<double> weights;   // scaling applied to each row
  Index draws = 0;               // alpha
  Index escape_rows = 0;
  double leverage_sum = 0;       // sum of tau~ over non-escaping rows
  bool exact = false;            // all small rows kept unscaled
};

SmallSample sample_small(const TwoTableJoin& join, const BlockSplit& split, const LeverageModel& model,
                         const EmbedConfig& cfg);

/// Stacked big-block sketches after optional compaction. For an empty block
/// list the result has zero rows.
MatrixXd embed_big(const TwoTableJoin& join, const std::vector<Index>& big_blocks, const EmbedConfig& cfg);

struct Embedding {
  MatrixXd matrix;
  Index big_rows = 0;  // leading rows from big blocks; the rest are small-block rows
  Index big_blocks = 0;
  Index small_blocks = 0;
  std::int64_t n_small = 0;
  std::int64_t join_rows = 0;
  double gamma = 1;
  SmallSample small;
  std::vector<PhaseTiming> phases;

  Index rows() const { return matrix.rows(); }
  auto big_part() const { return matrix.topRows(big_rows); }
  auto small_part() const { return matrix.bottomRows(matrix.rows() - big_rows); }
};

Embedding subspace_embed(const TwoTableJoin& join, const EmbedConfig& cfg);

}  // namespace joinsketch
