#pragma once

// Synthetic chain joins T1 - T2 - ... - Tm for benchmarks and tests. Table j
// carries the keys shared with its neighbours (k1 between T1 and T2, k2
// between T2 and T3, ...) and its own features, uniform on [0, 1].

#include "joinsketch/table.hpp"
#include "joinsketch/types.hpp"

#include <string>
#include <vector>

namespace joinsketch {

struct SynthShape {
  std::vector<Index> rows;      // per table
  std::vector<Index> features;  // per table
  std::int64_t key_cardinality = 1;
  /// Per-table key distribution: 0 assigns keys round-robin, s > 0 draws
  /// them from a Zipf law with exponent s. One value applies to all tables.
  std::vector<double> skew = {0.0};
  /// When >= 0, the last table gets a target column "y": a fixed random
  /// combination of its features plus Gaussian noise of this deviation.
  double target_noise = -1.0;

  /// Throws ConfigError on empty or non-positive sizes.
  void validate() const;
};

std::vector<Table> synth_generate(const SynthShape& shape, Seed seed);

/// Writes T1.csv .. Tm.csv into `dir` and returns the paths.
std::vector<std::string> write_tables(const std::vector<Table>& tables, const std::string& dir);

}  // namespace joinsketch
