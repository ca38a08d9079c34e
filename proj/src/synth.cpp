#include "joinsketch/synth.hpp"

#include "joinsketch/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace joinsketch {

namespace {

/// Inverse-CDF sampler over [0, n) with P(i) proportional to (i + 1)^-s.
class Zipf {
 public:
  Zipf(std::int64_t n, double s) : cdf_(static_cast<std::size_t>(n)) {
    double acc = 0;
    for (std::int64_t i = 0; i < n; ++i) cdf_[static_cast<std::size_t>(i)] = acc += std::pow(static_cast<double>(i + 1), -s);
    for (auto& c : cdf_) c /= acc;
  }
  std::int64_t draw(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::int64_t>(static_cast<std::int64_t>(it - cdf_.begin()),
                                  static_cast<std::int64_t>(cdf_.size()) - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

void SynthShape::validate() const {
  if (rows.empty()) throw ConfigError("synthetic shape needs at least one table");
  if (features.size() != rows.size())
    throw ConfigError(fmt::format("synthetic shape: {} row counts but {} feature counts", rows.size(), features.size()));
  for (const Index n : rows)
    if (n <= 0) throw ConfigError("synthetic shape: row counts must be positive");
  for (const Index f : features)
    if (f < 0) throw ConfigError("synthetic shape: feature counts must be non-negative");
  if (key_cardinality <= 0) throw ConfigError("synthetic shape: key cardinality must be positive");
  if (skew.size() != 1 && skew.size() != rows.size())
    throw ConfigError("synthetic shape: give one skew or one per table");
  for (const double s : skew)
    if (!(s >= 0)) throw ConfigError("synthetic shape: skew must be >= 0");
}

std::vector<Table> synth_generate(const SynthShape& shape, Seed seed) {
  shape.validate();
  const auto m = static_cast<Index>(shape.rows.size());
  std::vector<Table> out;
  for (Index j = 0; j < m; ++j) {
    Rng rng(seed.derive(static_cast<std::uint64_t>(j) + 1));
    const Index n = shape.rows[static_cast<std::size_t>(j)];
    const double s = shape.skew.size() == 1 ? shape.skew[0] : shape.skew[static_cast<std::size_t>(j)];
    std::vector<std::string> cols;
    if (j > 0) cols.push_back(fmt::format("k{}", j));
    if (j + 1 < m) cols.push_back(fmt::format("k{}", j + 1));
    const auto nkeys = static_cast<Index>(cols.size());
    const Index f = shape.features[static_cast<std::size_t>(j)];
    for (Index i = 0; i < f; ++i) cols.push_back(fmt::format("t{}_x{}", j + 1, i));
    const bool target = shape.target_noise >= 0 && j + 1 == m;
    if (target) cols.push_back("y");

    MatrixXd v(n, static_cast<Index>(cols.size()));
    const Zipf zipf(s > 0 ? shape.key_cardinality : 1, s);
    for (Index r = 0; r < n; ++r)
      for (Index k = 0; k < nkeys; ++k)
        v(r, k) = static_cast<double>(s > 0 ? zipf.draw(rng) : r % shape.key_cardinality);
    for (Index r = 0; r < n; ++r)
      for (Index i = 0; i < f; ++i) v(r, nkeys + i) = rng.uniform();
    if (target) {
      VectorXd coef(f);
      for (Index i = 0; i < f; ++i) coef(i) = 2.0 * rng.uniform() - 1.0;
      for (Index r = 0; r < n; ++r)
        v(r, nkeys + f) = v.row(r).segment(nkeys, f).dot(coef) + shape.target_noise * rng.normal();
    }
    out.push_back(make_table(fmt::format("T{}", j + 1), cols, v));
  }
  return out;
}

std::vector<std::string> write_tables(const std::vector<Table>& tables, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  for (const auto& t : tables) {
    paths.push_back((std::filesystem::path(dir) / (t.name + ".csv")).string());
    write_csv(t, paths.back());
  }
  return paths;
}

}  // namespace joinsketch
