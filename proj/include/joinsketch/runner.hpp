#pragma once

// Experiment harness behind the command-line tool: configuration, ingestion,
// one run of an algorithm against its exact baseline, and reports as JSON
// text plus a flat CSV row.

#include "joinsketch/embed.hpp"
#include "joinsketch/query.hpp"
#include "joinsketch/synth.hpp"
#include "joinsketch/table.hpp"
#include "joinsketch/types.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace joinsketch {

enum class Algorithm { two_table, general, faq_exact, materialize_oracle };
std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);
std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct TableSource {
  std::string name;
  std::string path;
};

struct Sweep {
  std::string parameter;  // k, lambda, epsilon or n
  std::vector<double> values;
  std::string command = "regress";  // embed, regress or ridge
};

struct RunConfig {
  std::vector<TableSource> tables;
  /// Generates the tables in memory when `tables` is empty.
  std::optional<SynthShape> synth;
  std::vector<std::string> keys;
  /// Feature columns U; empty means every non-key column except the target.
  std::vector<std::string> features;
  std::string target;
  Algorithm algorithm = Algorithm::two_table;
  double epsilon = 0.1;
  double eps0 = 0.5;  // accuracy of the preconditioning embedding
  double lambda = 0;
  std::optional<Index> k;
  Mode mode = Mode::dense;
  std::uint64_t seed = 0;
  int threads = 1;
  bool normalize = false;
  char delimiter = ',';
  std::string dictionary;  // where to save the key dictionary, if set
  std::string out;         // report prefix: <out>.json and <out>.csv
  std::optional<Sweep> sweep;
  /// Fraction of T1 key tuples held out for validation in ridge runs.
  double validation_fraction = 0.1;

  /// Throws ConfigError on out-of-range parameters.
  void validate() const;
};

/// Accepts the field names of RunConfig; unknown fields are rejected.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& cfg);

struct Dataset {
  std::vector<Table> tables;
  KeyDictionary dictionary;
};

/// Reads the configured CSV files (or generates the synthetic tables).
Dataset ingest(const RunConfig& cfg);

/// Writes the synthetic tables of `cfg` to `dir` together with a config.json
/// that reads them back (paths relative to `dir`), and returns that config.
RunConfig write_synth(const RunConfig& cfg, const std::string& dir);

struct Report {
  static constexpr double none = std::numeric_limits<double>::quiet_NaN();

  std::string command;
  std::string algorithm;
  std::uint64_t seed = 0;
  double epsilon = none;
  double lambda = none;
  Index k = -1;  // requested sketch rows, -1 for the default
  Index tables = 0;
  std::int64_t join_rows = 0;
  Index dim = 0;       // join columns
  Index features = 0;  // |U|
  Index sketch_rows = 0;
  Index rank = 0;
  Index iterations = 0;
  std::string status;
  double residual = none;           // ||J_U x - b|| on the training join
  double baseline_residual = none;  // same for the exact solution
  double objective = none;
  double baseline_objective = none;
  double err = none;  // relative error of the objective against the baseline
  double mse = none;  // mean squared error on the validation join
  double baseline_mse = none;
  std::int64_t validation_rows = 0;
  double eig_min = none;  // embed: extreme eigenvalues of the normalized sketch gram
  double eig_max = none;
  std::string sweep_parameter;
  double sweep_value = none;
  VectorXd x;
  std::vector<PhaseTiming> phases;
};

/// (r^2 - r_bf^2) / r_bf^2; r^2 itself when the baseline residual vanishes.
double relative_error(double residual, double baseline_residual);

std::string report_json(const Report& r);
std::string csv_header();
/// Timings are left out, so identical runs give identical rows.
std::string csv_row(const Report& r);

/// Extreme eigenvalues of G^{+/2} M G^{+/2} on range(G), eigenvalues of G
/// below 1e-10 of the largest treated as zero.
std::pair<double, double> spectral_range(const MatrixXd& gram, const MatrixXd& sketch_gram);

/// Row filter of the first table for the ridge split: true for validation.
std::vector<bool> validation_rows(const Table& t1, const std::vector<std::string>& keys, double fraction,
                                  std::uint64_t seed);

Report run_embed(const RunConfig& cfg, const Dataset& data);
Report run_regress(const RunConfig& cfg, const Dataset& data);
Report run_ridge(const RunConfig& cfg, const Dataset& data);
/// Also returns the gram matrix with its column names.
Report run_gram(const RunConfig& cfg, const Dataset& data, MatrixXd& gram, std::vector<std::string>& columns);
/// One report per sweep value.
std::vector<Report> run_bench(const RunConfig& cfg);

/// Writes <out>.json and appends to <out>.csv (header on a new file).
void write_report(const std::vector<Report>& reports, const std::string& out);

}  // namespace joinsketch
