#include "joinsketch/sampler.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <numeric>

namespace joinsketch {

VectorXd leaf_vector_t1(const RowVectorXd& a) {
  const Index r = a.size();
  VectorXd v(3 * r);
  for (Index q = 0; q < r; ++q) v.segment<3>(3 * q) << 1.0, 2.0 * a(q), a(q) * a(q);
  return v;
}

VectorXd leaf_vector_t2(const RowVectorXd& b) {
  const Index r = b.size();
  VectorXd v(3 * r);
  for (Index q = 0; q < r; ++q) v.segment<3>(3 * q) << b(q) * b(q), b(q), 1.0;
  return v;
}

namespace {

std::vector<Index> all_blocks(const TwoTableJoin& join) {
  std::vector<Index> b(static_cast<std::size_t>(join.index.size()));
  std::iota(b.begin(), b.end(), Index{0});
  return b;
}

Index padded_leaves(Index n) { return static_cast<Index>(std::bit_ceil(static_cast<std::uint64_t>(std::max<Index>(n, 1)))); }

}  // namespace

SamplerForest::SamplerForest(const TwoTableJoin& join, const MatrixXd& y) : SamplerForest(join, all_blocks(join), y) {}

SamplerForest::SamplerForest(const TwoTableJoin& join, std::vector<Index> blocks, const MatrixXd& y)
    : join_(&join), r_(y.cols()), blocks_(std::move(blocks)) {
  require_dims(y.rows() == join.dim(), "SamplerForest: Y must have one row per join column");
  if (r_ < 1) throw DimensionError("SamplerForest: Y needs at least one column");

  slot_of_block_.assign(static_cast<std::size_t>(join.index.size()), -1);
  Index columns = 0;
  for (std::size_t s = 0; s < blocks_.size(); ++s) {
    const Block& b = join.index.blocks[static_cast<std::size_t>(blocks_[s])];
    slot_of_block_[static_cast<std::size_t>(blocks_[s])] = static_cast<Index>(s);
    const Index p1 = padded_leaves(b.size1()), p2 = padded_leaves(b.size2());
    tree1_.push_back({columns, p1, b.size1()});
    columns += 2 * p1 - 1;
    tree2_.push_back({columns, p2, b.size2()});
    columns += 2 * p2 - 1;
  }

  const MatrixXd a = join.padded1 * y;
  const MatrixXd bb = join.padded2 * y;
  nodes_ = MatrixXd::Zero(r_ + 2, columns);
  const auto fill = [&](const Tree& t, const std::vector<Index>& rows, const MatrixXd& proj) {
    for (Index l = 0; l < t.size; ++l) {
      auto leaf = nodes_.col(t.first + t.leaves - 1 + l);
      const auto row = proj.row(rows[static_cast<std::size_t>(l)]);
      leaf(0) = 1.0;
      leaf(1) = row.squaredNorm();
      leaf.tail(r_) = row.transpose();
    }
    for (Index i = t.leaves - 2; i >= 0; --i)
      nodes_.col(t.first + i) = nodes_.col(t.first + 2 * i + 1) + nodes_.col(t.first + 2 * i + 2);
  };
  for (std::size_t s = 0; s < blocks_.size(); ++s) {
    const Block& b = join.index.blocks[static_cast<std::size_t>(blocks_[s])];
    fill(tree1_[s], b.rows1, a);
    fill(tree2_[s], b.rows2, bb);
  }

  block_mass_.resize(blocks_.size());
  double raw_total = 0;
  for (std::size_t s = 0; s < blocks_.size(); ++s) {
    block_mass_[s] = std::max(0.0, pair_mass(tree1_[s].first, tree2_[s].first));
    raw_total += block_mass_[s];
  }
  const double tol = 1e-12 * raw_total;
  prefix_.resize(blocks_.size());
  for (std::size_t s = 0; s < blocks_.size(); ++s) {
    if (block_mass_[s] < tol) block_mass_[s] = 0;
    total_ += block_mass_[s];
    prefix_[s] = total_;
  }
}

double SamplerForest::pair_mass(Index col1, Index col2) const {
  const auto u = node(col1);
  const auto v = node(col2);
  return u(0) * v(1) + u(1) * v(0) + 2.0 * u.tail(r_).dot(v.tail(r_));
}

double SamplerForest::row_mass(const JoinRowId& id) const {
  const Index slot = slot_of_block_.at(static_cast<std::size_t>(id.block));
  if (slot < 0) throw DimensionError(fmt::format("block {} is not covered by this sampler", id.block));
  const Tree& t1 = tree1_[static_cast<std::size_t>(slot)];
  const Tree& t2 = tree2_[static_cast<std::size_t>(slot)];
  return std::max(0.0, pair_mass(t1.first + t1.leaves - 1 + id.l1, t2.first + t2.leaves - 1 + id.l2));
}

Index SamplerForest::descend(const Tree& tree, Rng& rng, const auto& mass_of) const {
  Index i = 0;
  while (i < tree.leaves - 1) {
    const double ml = mass_of(tree.first + 2 * i + 1);
    const double mr = mass_of(tree.first + 2 * i + 2);
    const double u = rng.uniform() * (ml + mr);
    i = (mr <= 0 || u < ml) ? 2 * i + 1 : 2 * i + 2;
  }
  return i - (tree.leaves - 1);
}

SampledRow SamplerForest::sample(Rng& rng) const {
  if (!(total_ > 0)) throw AlgorithmError("l2 sampler: the product J*Y is zero, nothing to sample");
  const double u = rng.uniform() * total_;
  auto it = std::upper_bound(prefix_.begin(), prefix_.end(), u);
  if (it == prefix_.end()) --it;
  auto slot = static_cast<std::size_t>(it - prefix_.begin());
  while (block_mass_[slot] <= 0 && slot > 0) --slot;  // rounding put u at the very end

  const double tol = 1e-12 * total_;
  const auto clamp = [tol](double m) { return m < tol ? 0.0 : m; };
  const Tree& t1 = tree1_[slot];
  const Tree& t2 = tree2_[slot];
  const Index l1 = descend(t1, rng, [&](Index c) { return clamp(pair_mass(c, t2.first)); });
  const Index leaf1 = t1.first + t1.leaves - 1 + l1;
  const Index l2 = descend(t2, rng, [&](Index c) { return clamp(pair_mass(leaf1, c)); });
  const JoinRowId id{blocks_[slot], l1, l2};
  return {id, row_mass(id) / total_};
}

std::vector<WeightedRow> SamplerForest::enumerate_nonzero(double abs_floor) const {
  const double thr = std::max(1e-12 * total_, abs_floor);
  std::vector<WeightedRow> out;
  std::vector<Index> stack1, stack2;
  for (std::size_t s = 0; s < blocks_.size(); ++s) {
    const Tree& t1 = tree1_[s];
    const Tree& t2 = tree2_[s];
    if (!(pair_mass(t1.first, t2.first) > thr)) continue;
    stack1.assign(1, 0);
    while (!stack1.empty()) {
      const Index i = stack1.back();
      stack1.pop_back();
      if (!(pair_mass(t1.first + i, t2.first) > thr)) continue;
      if (i < t1.leaves - 1) {
        stack1.push_back(2 * i + 2);
        stack1.push_back(2 * i + 1);
        continue;
      }
      const Index l1 = i - (t1.leaves - 1);
      const Index leaf1 = t1.first + i;
      stack2.assign(1, 0);
      while (!stack2.empty()) {
        const Index j = stack2.back();
        stack2.pop_back();
        const double m = pair_mass(leaf1, t2.first + j);
        if (!(m > thr)) continue;
        if (j < t2.leaves - 1) {
          stack2.push_back(2 * j + 2);
          stack2.push_back(2 * j + 1);
        } else {
          out.push_back({JoinRowId{blocks_[s], l1, j - (t2.leaves - 1)}, m});
        }
      }
    }
  }
  return out;
}

double SamplerForest::tree_defect() const {
  double worst = 0;
  const auto check = [&](const Tree& t) {
    for (Index i = 0; i < t.leaves - 1; ++i) {
      const VectorXd diff = node(t.first + i) - node(t.first + 2 * i + 1) - node(t.first + 2 * i + 2);
      worst = std::max(worst, diff.cwiseAbs().maxCoeff());
    }
  };
  for (std::size_t s = 0; s < blocks_.size(); ++s) {
    check(tree1_[s]);
    check(tree2_[s]);
  }
  return worst;
}

}  // namespace joinsketch
