#include "joinsketch/join.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <unordered_map>

namespace joinsketch {

Index ColumnPartition::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw DataError(fmt::format("join has no column '{}'", name));
  return static_cast<Index>(it - columns.begin());
}

ColumnPartition make_partition(std::span<const Table* const> tables) {
  ColumnPartition p;
  p.assigned.resize(tables.size());
  for (std::size_t j = 0; j < tables.size(); ++j) {
    const Table& t = *tables[j];
    for (Index c = 0; c < t.cols(); ++c) {
      const auto& name = t.columns[static_cast<std::size_t>(c)];
      if (std::find(p.columns.begin(), p.columns.end(), name) != p.columns.end()) continue;
      p.assigned[j].emplace_back(c, p.dim());
      p.columns.push_back(name);
      p.owner.push_back(static_cast<Index>(j));
    }
  }
  return p;
}

MatrixXd pad_table(const Table& table, Index table_index, const ColumnPartition& partition) {
  MatrixXd out = MatrixXd::Zero(table.rows(), partition.dim());
  for (const auto& [src, dst] : partition.assigned[static_cast<std::size_t>(table_index)])
    out.col(dst) = table.values.col(src);
  return out;
}

namespace {

struct KeyHash {
  std::size_t operator()(const KeyTuple& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (const auto v : k) h = detail::splitmix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

std::vector<Index> key_positions(const Table& t, const std::vector<std::string>& key_columns) {
  std::vector<Index> pos;
  for (const auto& k : key_columns) pos.push_back(t.column_index(k));
  return pos;
}

KeyTuple key_of(const Table& t, Index row, const std::vector<Index>& pos) {
  KeyTuple key(pos.size());
  for (std::size_t q = 0; q < pos.size(); ++q) key[q] = key_value(t.values(row, pos[q]));
  return key;
}

bool encoded(const Table& t, Index c) {
  return !t.dictionary_encoded.empty() && t.dictionary_encoded[static_cast<std::size_t>(c)];
}

}  // namespace

BlockIndex build_block_index(const Table& t1, const Table& t2, const std::vector<std::string>& key_columns) {
  if (key_columns.empty()) throw ConfigError("join key set is empty; cross products are not supported");
  const auto pos1 = key_positions(t1, key_columns);
  const auto pos2 = key_positions(t2, key_columns);
  for (std::size_t q = 0; q < key_columns.size(); ++q)
    if (encoded(t1, pos1[q]) != encoded(t2, pos2[q]))
      throw DataError(fmt::format("key column '{}' is string-valued in one table and numeric in the other",
                                  key_columns[q]));

  std::unordered_map<KeyTuple, std::vector<Index>, KeyHash> left;
  for (Index r = 0; r < t1.rows(); ++r) left[key_of(t1, r, pos1)].push_back(r);

  std::unordered_map<KeyTuple, std::size_t, KeyHash> slot;
  BlockIndex index;
  index.n1 = t1.rows();
  index.n2 = t2.rows();
  for (Index r = 0; r < t2.rows(); ++r) {
    KeyTuple key = key_of(t2, r, pos2);
    const auto hit = left.find(key);
    if (hit == left.end()) continue;
    auto [it, fresh] = slot.try_emplace(key, index.blocks.size());
    if (fresh) index.blocks.push_back(Block{std::move(key), hit->second, {}});
    index.blocks[it->second].rows2.push_back(r);
  }
  std::sort(index.blocks.begin(), index.blocks.end(), [](const Block& a, const Block& b) { return a.key < b.key; });

  index.offsets.assign(index.blocks.size() + 1, 0);
  for (std::size_t b = 0; b < index.blocks.size(); ++b) index.offsets[b + 1] = index.offsets[b] + index.blocks[b].size();
  return index;
}

std::int64_t global_row(const BlockIndex& index, const JoinRowId& id) {
  const Block& b = index.blocks[static_cast<std::size_t>(id.block)];
  return index.offsets[static_cast<std::size_t>(id.block)] + static_cast<std::int64_t>(id.l1) * b.size2() + id.l2;
}

JoinRowId locate_row(const BlockIndex& index, std::int64_t row) {
  if (row < 0 || row >= index.rows()) throw DimensionError(fmt::format("join row {} out of range", row));
  const auto it = std::upper_bound(index.offsets.begin(), index.offsets.end(), row);
  const auto b = static_cast<Index>(it - index.offsets.begin()) - 1;
  const std::int64_t local = row - index.offsets[static_cast<std::size_t>(b)];
  const Index s2 = index.blocks[static_cast<std::size_t>(b)].size2();
  return JoinRowId{b, static_cast<Index>(local / s2), static_cast<Index>(local % s2)};
}

MatrixXd TwoTableJoin::side1(Index block) const {
  const auto& rows = index.blocks[static_cast<std::size_t>(block)].rows1;
  return padded1(rows, Eigen::all);
}

MatrixXd TwoTableJoin::side2(Index block) const {
  const auto& rows = index.blocks[static_cast<std::size_t>(block)].rows2;
  return padded2(rows, Eigen::all);
}

TwoTableJoin make_two_table_join(Table t1, Table t2, std::vector<std::string> key_columns) {
  t1.validate();
  t2.validate();
  TwoTableJoin join{std::move(t1), std::move(t2), std::move(key_columns), {}, {}, {}, {}};
  const Table* tables[] = {&join.t1, &join.t2};
  join.partition = make_partition(tables);
  join.index = build_block_index(join.t1, join.t2, join.key_columns);
  join.padded1 = pad_table(join.t1, 0, join.partition);
  join.padded2 = pad_table(join.t2, 1, join.partition);
  return join;
}

MatrixXd kronecker_block(const MatrixXd& a, const MatrixXd& b) {
  require_dims(a.cols() == b.cols(), "kronecker_block: column count mismatch");
  const Index p = a.rows(), q = b.rows();
  MatrixXd out(p * q, a.cols());
  for (Index l1 = 0; l1 < p; ++l1) out.middleRows(l1 * q, q) = b.rowwise() + a.row(l1);
  return out;
}

MatrixXd materialize_blocks(const TwoTableJoin& join, std::span<const Index> blocks, std::int64_t cap) {
  std::int64_t n = 0;
  for (const Index b : blocks) n += join.index.blocks[static_cast<std::size_t>(b)].size();
  if (n > cap)
    throw AlgorithmError(fmt::format("join has {} rows, above the materialization cap of {}; use a sketched path",
                                     n, cap));
  MatrixXd out(n, join.dim());
  Index r = 0;
  for (const Index b : blocks) {
    const Index rows = static_cast<Index>(join.index.blocks[static_cast<std::size_t>(b)].size());
    out.middleRows(r, rows) = kronecker_block(join.side1(b), join.side2(b));
    r += rows;
  }
  return out;
}

MatrixXd materialize_join(const TwoTableJoin& join, std::int64_t cap) {
  std::vector<Index> all(static_cast<std::size_t>(join.index.size()));
  for (Index b = 0; b < join.index.size(); ++b) all[static_cast<std::size_t>(b)] = b;
  return materialize_blocks(join, all, cap);
}

UniformRowSampler::UniformRowSampler(const BlockIndex& index, std::vector<Index> blocks)
    : index_(&index), blocks_(std::move(blocks)) {
  prefix_.reserve(blocks_.size());
  std::int64_t total = 0;
  for (const Index b : blocks_) {
    total += index.blocks[static_cast<std::size_t>(b)].size();
    prefix_.push_back(total);
  }
}

UniformRowSampler::UniformRowSampler(const BlockIndex& index) : UniformRowSampler(index, [&] {
  std::vector<Index> all(static_cast<std::size_t>(index.size()));
  for (Index b = 0; b < index.size(); ++b) all[static_cast<std::size_t>(b)] = b;
  return all;
}()) {}

JoinRowId UniformRowSampler::draw(Rng& rng) const {
  if (population() == 0) throw AlgorithmError("cannot sample from an empty join");
  const auto u = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(population())));
  const auto it = std::upper_bound(prefix_.begin(), prefix_.end(), u);
  const auto slot = static_cast<std::size_t>(it - prefix_.begin());
  const std::int64_t local = u - (slot == 0 ? 0 : prefix_[slot - 1]);
  const Index b = blocks_[slot];
  const Index s2 = index_->blocks[static_cast<std::size_t>(b)].size2();
  return JoinRowId{b, static_cast<Index>(local / s2), static_cast<Index>(local % s2)};
}

std::vector<JoinRowId> uniform_join_row_sample(const BlockIndex& index, Index count, Rng& rng) {
  const UniformRowSampler sampler(index);
  std::vector<JoinRowId> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) out.push_back(sampler.draw(rng));
  return out;
}

BlockSplit split_blocks(const BlockIndex& index, Index d, double gamma) {
  if (gamma < 1) throw ConfigError("gamma must be at least 1");
  BlockSplit split;
  split.threshold = static_cast<double>(d) * gamma;
  for (Index b = 0; b < index.size(); ++b) {
    const Block& blk = index.blocks[static_cast<std::size_t>(b)];
    if (static_cast<double>(std::max(blk.size1(), blk.size2())) >= split.threshold) {
      split.big.push_back(b);
    } else {
      split.small.push_back(b);
      split.n_small += blk.size();
    }
  }
  const double inputs = static_cast<double>(index.n1 + index.n2);
  if (static_cast<double>(split.big.size()) > 2.0 * inputs / split.threshold)
    throw AlgorithmError("block split: more big blocks than the input size allows");
  if (static_cast<double>(split.n_small) > inputs * split.threshold)
    throw AlgorithmError("block split: small-block rows exceed the input-size bound");
  return split;
}

}  // namespace joinsketch
