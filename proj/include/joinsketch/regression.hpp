#pragma once

// Least squares and ridge regression over joins. The two-table solver
// preconditions with a constant-accuracy subspace embedding and runs gradient
// descent whose products with J^T J are evaluated block by block, never
// forming J. Exact and sketched baselines work on general acyclic joins.

#include "joinsketch/embed.hpp"
#include "joinsketch/join.hpp"
#include "joinsketch/query.hpp"
#include "joinsketch/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace joinsketch {

/// w^T J^T J_U for w in join column space, from the per-block expansion
/// s2 (A w)^T A + s1 (B w)^T B + (1^T A w)(1^T B) + (1^T B w)(1^T A), where A
/// and B are the padded rows of the block's two sides. Blocks are summed in
/// fixed chunks in block order, so the result does not depend on `threads`.
RowVectorXd implicit_gram_product(const TwoTableJoin& join, const VectorXd& w, const std::vector<Index>& columns,
                                  int threads = 1);
/// Full d x d gram J^T J by the same expansion.
MatrixXd implicit_gram(const TwoTableJoin& join, int threads = 1);
/// ||J w||^2, accumulated per block in centered form (no cancellation).
double implicit_quadratic(const TwoTableJoin& join, const VectorXd& w, int threads = 1);

/// w = x on the columns U, -1 on the target, 0 elsewhere; J w = J_U x - b.
VectorXd residual_direction(Index d, const std::vector<Index>& features, Index target, const VectorXd& x);

struct RegressionProblem {
  const TwoTableJoin* join = nullptr;
  std::vector<Index> features;  // U, join column positions
  Index target = -1;            // b = J e_target
  double epsilon = 0.1;
  Seed seed{0};
  /// Embedding used for preconditioning; its epsilon is the constant eps0.
  EmbedConfig embed;

  /// Throws ConfigError unless U is nonempty, in range and excludes the target.
  void validate() const;
};

enum class SolveStatus { exact, converged, iteration_cap, diverged };
std::string to_string(SolveStatus s);

struct Solution {
  VectorXd x;
  double residual = 0;     // ||J_U x - b||
  double objective = 0;    // residual^2 (+ lambda ||x||^2 for ridge)
  Index iterations = 0;
  SolveStatus status = SolveStatus::exact;
  Index sketch_rows = 0;   // rows of the embedding or sketch used
  Index rank = 0;          // columns kept by the preconditioner
  /// Residual after the warm start and after each iteration.
  std::vector<double> history;
  std::vector<PhaseTiming> phases;
};

/// Iteration cap 10 * ceil(log2(1 / eps)).
Index regression_iteration_cap(double epsilon);

/// Sketch-preconditioned gradient descent. Stops at the cap, when the
/// relative improvement falls below machine precision, or after two
/// consecutive increases of the residual (status diverged).
Solution solve_regression(const RegressionProblem& p);

/// Normal equations from the FAQ gram; SVD least squares when singular.
Solution solve_exact_faq(const JoinQuery& q, const std::vector<Index>& features, Index target);
/// Same on the query equivalent to the problem's two-table join.
Solution solve_exact_faq(const RegressionProblem& p);

/// Ridge with the exact FAQ gram: (G_UU + lambda I) x = G_U,target.
Solution solve_ridge_exact(const JoinQuery& q, const std::vector<Index>& features, Index target, double lambda);
/// (SJ_U^T SJ_U + lambda I) x = SJ_U^T SJ_target for a given k x d sketch SJ.
VectorXd ridge_from_sketch(const MatrixXd& sj, const std::vector<Index>& features, Index target, double lambda);
/// Ridge on the DB-Sketch of a general join (k rows, default from eps).
Solution solve_ridge_sketched(const JoinQuery& q, const std::vector<Index>& features, Index target, double lambda,
                              double epsilon, Seed seed, std::optional<Index> k = std::nullopt);
/// Ridge on the two-table subspace embedding.
Solution solve_ridge_sketched(const RegressionProblem& p, double lambda);

/// ||J_U x - b||^2 + lambda ||x||^2 evaluated exactly.
double ridge_objective(const JoinQuery& q, const std::vector<Index>& features, Index target, const VectorXd& x,
                       double lambda);

}  // namespace joinsketch
