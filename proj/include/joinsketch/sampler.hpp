#pragma once

// l2 row sampling from J*Y for a two-table join J without materializing it.
// Each block keeps one binary tree per side. A table-1 leaf stands for the
// row a = T1_hat_l Y and a table-2 leaf for b = T2_hat_l Y; the mass of the
// pair is sum_q (a_q + b_q)^2, which splits into per-side sums. An internal
// node stores (leaf count, sum of squared entries, column sums), so the mass
// of any (node, node) pair is one short inner product.

#include "joinsketch/join.hpp"
#include "joinsketch/random.hpp"
#include "joinsketch/types.hpp"

#include <vector>

namespace joinsketch {

/// The 3r-dimensional leaf encodings. <leaf_vector_t1(a), leaf_vector_t2(b)> = |a + b|^2.
VectorXd leaf_vector_t1(const RowVectorXd& a);
VectorXd leaf_vector_t2(const RowVectorXd& b);

struct SampledRow {
  JoinRowId id;
  double p = 0;  // exact probability of drawing this row
};

struct WeightedRow {
  JoinRowId id;
  double mass = 0;  // |(JY)_row|^2
};

class SamplerForest {
 public:
  /// Forest over the listed blocks of `join`, for the product J * Y.
  SamplerForest(const TwoTableJoin& join, std::vector<Index> blocks, const MatrixXd& y);
  /// Forest over all blocks.
  SamplerForest(const TwoTableJoin& join, const MatrixXd& y);

  /// |J_B Y|_F^2 over the covered blocks.
  double total() const { return total_; }
  Index block_count() const { return static_cast<Index>(blocks_.size()); }
  double block_mass(Index slot) const { return block_mass_[static_cast<std::size_t>(slot)]; }
  const std::vector<Index>& blocks() const { return blocks_; }

  /// |(JY)_row|^2 from the leaf encodings.
  double row_mass(const JoinRowId& id) const;
  double probability(const JoinRowId& id) const { return row_mass(id) / total_; }

  /// One draw with P[row] = |(JY)_row|^2 / total. Throws AlgorithmError when total is 0.
  SampledRow sample(Rng& rng) const;

  /// Every row with mass above max(1e-12 * total, abs_floor), found by a
  /// depth-first search that skips zero-mass subtrees.
  std::vector<WeightedRow> enumerate_nonzero(double abs_floor = 0) const;

  /// Max deviation between any internal node and the sum of its children.
  double tree_defect() const;

 private:
  struct Tree {
    Index first = 0;   // column of the heap root in nodes_
    Index leaves = 0;  // padded leaf count (power of two)
    Index size = 0;    // real leaf count
  };

  auto node(Index col) const { return nodes_.col(col); }
  double pair_mass(Index col1, Index col2) const;
  Index descend(const Tree& tree, Rng& rng, const auto& mass_of) const;

  const TwoTableJoin* join_;
  Index r_;
  std::vector<Index> blocks_;
  std::vector<Index> slot_of_block_;
  std::vector<Tree> tree1_, tree2_;
  MatrixXd nodes_;  // (r + 2) x nodes: count, sum of squares, column sums
  std::vector<double> block_mass_;
  std::vector<double> prefix_;
  double total_ = 0;
};

}  // namespace joinsketch
