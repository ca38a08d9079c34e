#pragma once

// Two-table equi-join structure: block decomposition, zero-padded tables and
// the canonical join-row indexing shared by samplers, sketches and oracles.

#include "joinsketch/random.hpp"
#include "joinsketch/table.hpp"
#include "joinsketch/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace joinsketch {

using KeyTuple = std::vector<std::int64_t>;

/// Column layout of a join: the output columns and which table supplies each.
/// A column shared by several tables is owned by the lowest-indexed one.
struct ColumnPartition {
  std::vector<std::string> columns;
  std::vector<Index> owner;
  /// For each table, (table column, join column) pairs it supplies.
  std::vector<std::vector<std::pair<Index, Index>>> assigned;

  Index dim() const { return static_cast<Index>(columns.size()); }
  Index column(const std::string& name) const;
};

ColumnPartition make_partition(std::span<const Table* const> tables);

/// Table rows embedded into join column space; zeros outside the owned columns.
MatrixXd pad_table(const Table& table, Index table_index, const ColumnPartition& partition);

struct Block {
  KeyTuple key;
  std::vector<Index> rows1;
  std::vector<Index> rows2;

  Index size1() const { return static_cast<Index>(rows1.size()); }
  Index size2() const { return static_cast<Index>(rows2.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(rows1.size()) * static_cast<std::int64_t>(rows2.size()); }
};

/// Blocks sorted by key tuple, with row offsets into the canonical order.
struct BlockIndex {
  std::vector<Block> blocks;
  std::vector<std::int64_t> offsets;  // offsets[b] = first join row of block b; back() = N
  Index n1 = 0;
  Index n2 = 0;

  std::int64_t rows() const { return offsets.empty() ? 0 : offsets.back(); }
  Index size() const { return static_cast<Index>(blocks.size()); }
};

BlockIndex build_block_index(const Table& t1, const Table& t2, const std::vector<std::string>& key_columns);

/// Row (l1, l2) of block b: the pair (blocks[b].rows1[l1], blocks[b].rows2[l2]).
struct JoinRowId {
  Index block = 0;
  Index l1 = 0;
  Index l2 = 0;
  bool operator==(const JoinRowId&) const = default;
};

std::int64_t global_row(const BlockIndex& index, const JoinRowId& id);
JoinRowId locate_row(const BlockIndex& index, std::int64_t row);

/// A two-table join ready for sketching.
struct TwoTableJoin {
  Table t1;
  Table t2;
  std::vector<std::string> key_columns;
  ColumnPartition partition;
  BlockIndex index;
  MatrixXd padded1;  // n1 x d
  MatrixXd padded2;  // n2 x d

  Index dim() const { return partition.dim(); }
  std::int64_t rows() const { return index.rows(); }

  RowVectorXd row(const JoinRowId& id) const {
    const Block& b = index.blocks[static_cast<std::size_t>(id.block)];
    return padded1.row(b.rows1[static_cast<std::size_t>(id.l1)]) + padded2.row(b.rows2[static_cast<std::size_t>(id.l2)]);
  }
  /// Padded rows of one side of a block, in block order.
  MatrixXd side1(Index block) const;
  MatrixXd side2(Index block) const;
};

TwoTableJoin make_two_table_join(Table t1, Table t2, std::vector<std::string> key_columns);

inline constexpr std::int64_t kDefaultMaterializeCap = 10'000'000;

/// Dense N x d join in canonical order. Oracle use only.
MatrixXd materialize_join(const TwoTableJoin& join, std::int64_t cap = kDefaultMaterializeCap);
/// The rows of the listed blocks, stacked in canonical order.
MatrixXd materialize_blocks(const TwoTableJoin& join, std::span<const Index> blocks,
                            std::int64_t cap = kDefaultMaterializeCap);
/// Rows of J_block = A (x) 1 + 1 (x) B built from the Kronecker formula.
MatrixXd kronecker_block(const MatrixXd& a, const MatrixXd& b);

/// Draws join rows uniformly (with replacement) from the union of `blocks`.
class UniformRowSampler {
 public:
  UniformRowSampler(const BlockIndex& index, std::vector<Index> blocks);
  explicit UniformRowSampler(const BlockIndex& index);

  std::int64_t population() const { return prefix_.empty() ? 0 : prefix_.back(); }
  JoinRowId draw(Rng& rng) const;

 private:
  const BlockIndex* index_;
  std::vector<Index> blocks_;
  std::vector<std::int64_t> prefix_;  // cumulative sizes, prefix_[i] = sum of sizes of blocks_[0..i]
};

std::vector<JoinRowId> uniform_join_row_sample(const BlockIndex& index, Index count, Rng& rng);

struct BlockSplit {
  std::vector<Index> big;
  std::vector<Index> small;
  std::int64_t n_small = 0;
  double threshold = 0;
};

/// Big blocks have max(s1, s2) >= d * gamma.
BlockSplit split_blocks(const BlockIndex& index, Index d, double gamma);

}  // namespace joinsketch
