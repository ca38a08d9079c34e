#include "joinsketch/runner.hpp"

#include "joinsketch/dbsketch.hpp"
#include "joinsketch/faq.hpp"
#include "joinsketch/random.hpp"
#include "joinsketch/regression.hpp"

#include "util.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace joinsketch {

namespace {

using detail::Stopwatch;
using json = nlohmann::ordered_json;

constexpr std::uint64_t kSplitStream = 0x73706c6974;  // "split"

// --- config parsing -------------------------------------------------------------

template <class T>
T get(const json& j, const char* field) {
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config field '{}': {}", field, e.what()));
  }
}

void check_fields(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError(fmt::format("{}: unknown field '{}'", where, key));
}

SynthShape parse_synth(const json& j) {
  check_fields(j, {"rows", "features", "key_cardinality", "skew", "target_noise"}, "synth");
  SynthShape s;
  s.rows = get<std::vector<Index>>(j, "rows");
  s.features = get<std::vector<Index>>(j, "features");
  if (j.contains("key_cardinality")) s.key_cardinality = get<std::int64_t>(j, "key_cardinality");
  if (j.contains("skew"))
    s.skew = j.at("skew").is_array() ? get<std::vector<double>>(j, "skew") : std::vector<double>{get<double>(j, "skew")};
  if (j.contains("target_noise")) s.target_noise = get<double>(j, "target_noise");
  return s;
}

json synth_json(const SynthShape& s) {
  json j;
  j["rows"] = s.rows;
  j["features"] = s.features;
  j["key_cardinality"] = s.key_cardinality;
  j["skew"] = s.skew;
  j["target_noise"] = s.target_noise;
  return j;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_number(double v) { return std::isfinite(v) ? fmt::format("{}", v) : std::string(); }

// --- join setup -----------------------------------------------------------------

std::vector<std::string> header_of(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("'{}': missing header row", path));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, delimiter)) {
    const auto b = cell.find_first_not_of(" \t\"");
    const auto e = cell.find_last_not_of(" \t\"");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

/// Columns present in at least two tables, in order of first appearance.
std::vector<std::string> shared_columns(const std::vector<Table>& tables) {
  std::map<std::string, int> count;
  std::vector<std::string> order;
  for (const auto& t : tables)
    for (const auto& c : t.columns)
      if (count[c]++ == 0) order.push_back(c);
  std::vector<std::string> out;
  for (const auto& c : order)
    if (count[c] >= 2) out.push_back(c);
  return out;
}

std::vector<std::string> resolved_keys(const RunConfig& cfg, const std::vector<Table>& tables) {
  const auto shared = shared_columns(tables);
  if (cfg.keys.empty()) return shared;
  const std::set<std::string> a(shared.begin(), shared.end()), b(cfg.keys.begin(), cfg.keys.end());
  if (a != b)
    throw ConfigError(fmt::format("join keys [{}] differ from the columns shared between tables [{}]",
                                  fmt::join(cfg.keys, ", "), fmt::join(shared, ", ")));
  return cfg.keys;
}

std::string resolved_target(const RunConfig& cfg) {
  if (!cfg.target.empty()) return cfg.target;
  if (cfg.tables.empty() && cfg.synth && cfg.synth->target_noise >= 0) return "y";
  return {};
}

struct Setup {
  std::vector<std::string> keys;
  std::optional<TwoTableJoin> join;
  JoinQuery query;
  std::vector<Index> features;
  Index target = -1;
};

Setup prepare(const RunConfig& cfg, std::vector<Table> tables, bool need_target) {
  Setup s;
  s.keys = resolved_keys(cfg, tables);
  const bool two = cfg.algorithm == Algorithm::two_table;
  if (two) {
    if (tables.size() != 2)
      throw ConfigError(fmt::format("the two-table algorithm needs exactly 2 tables, got {}", tables.size()));
    s.join = make_two_table_join(std::move(tables[0]), std::move(tables[1]), s.keys);
    s.query = query_from_join(*s.join);
  } else {
    s.query = make_query(std::move(tables));
  }
  const auto& part = s.query.partition;
  const auto position = [&](const std::string& name) {
    const auto it = std::find(part.columns.begin(), part.columns.end(), name);
    if (it == part.columns.end()) throw ConfigError(fmt::format("column '{}' is not in any table", name));
    return static_cast<Index>(it - part.columns.begin());
  };
  const std::string target = resolved_target(cfg);
  if (!target.empty()) s.target = position(target);
  if (need_target && s.target < 0) throw ConfigError("a target column is required");
  if (cfg.features.empty()) {
    const std::set<std::string> keys(s.keys.begin(), s.keys.end());
    for (Index c = 0; c < part.dim(); ++c)
      if (!keys.count(part.columns[static_cast<std::size_t>(c)]) && c != s.target) s.features.push_back(c);
  } else {
    for (const auto& f : cfg.features) {
      const Index c = position(f);
      if (c == s.target) throw ConfigError(fmt::format("column '{}' is both a feature and the target", f));
      if (std::find(s.features.begin(), s.features.end(), c) != s.features.end())
        throw ConfigError(fmt::format("feature column '{}' listed twice", f));
      s.features.push_back(c);
    }
  }
  if (need_target && s.features.empty()) throw ConfigError("no feature columns");
  return s;
}

EmbedConfig embed_config(const RunConfig& cfg, double epsilon) {
  EmbedConfig e;
  e.epsilon = epsilon;
  e.mode = cfg.mode;
  e.countsketch_rows = cfg.k;
  e.seed = Seed(cfg.seed);
  e.threads = cfg.threads;
  return e;
}

RegressionProblem problem_for(const RunConfig& cfg, const Setup& s) {
  RegressionProblem p;
  p.join = &*s.join;
  p.features = s.features;
  p.target = s.target;
  p.epsilon = cfg.epsilon;
  p.seed = Seed(cfg.seed);
  p.embed = embed_config(cfg, cfg.eps0);
  return p;
}

/// Ridge (least squares at lambda = 0) on the materialized join.
Solution solve_materialized(const JoinQuery& q, const std::vector<Index>& features, Index target, double lambda) {
  Stopwatch clock;
  Solution sol;
  const MatrixXd j = materialize_query(q);
  sol.phases.push_back({"materialize", clock.lap(), j.size()});
  const auto u = static_cast<Index>(features.size());
  MatrixXd ju(j.rows(), u);
  for (Index i = 0; i < u; ++i) ju.col(i) = j.col(features[static_cast<std::size_t>(i)]);
  const VectorXd b = j.col(target);
  if (lambda == 0) {
    const Eigen::ColPivHouseholderQR<MatrixXd> qr(ju);
    sol.x = qr.solve(b);
    sol.rank = qr.rank();
  } else {
    sol.x = (ju.transpose() * ju + lambda * MatrixXd::Identity(u, u)).llt().solve(ju.transpose() * b);
    sol.rank = u;
  }
  sol.phases.push_back({"solve", clock.lap(), ju.size()});
  sol.residual = (ju * sol.x - b).norm();
  sol.objective = sol.residual * sol.residual + lambda * sol.x.squaredNorm();
  sol.status = SolveStatus::exact;
  return sol;
}

Report base_report(const std::string& command, const RunConfig& cfg, const Setup& s) {
  Report r;
  r.command = command;
  r.algorithm = to_string(cfg.algorithm);
  r.seed = cfg.seed;
  r.epsilon = cfg.epsilon;
  r.lambda = cfg.lambda;
  r.k = cfg.k.value_or(-1);
  r.tables = s.query.table_count();
  r.join_rows = count_rows(s.query);
  r.dim = s.query.dim();
  r.features = static_cast<Index>(s.features.size());
  return r;
}

void take_solution(Report& r, const Solution& sol, const std::string& prefix = {}) {
  for (const auto& ph : sol.phases) r.phases.push_back({prefix + ph.phase, ph.seconds, ph.touched});
}

/// Rethrows module errors with the command and algorithm in front.
template <class Fn>
auto with_context(const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", context, e.what()));
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", context, e.what()));
  } catch (const AlgorithmError& e) {
    throw AlgorithmError(fmt::format("{}: {}", context, e.what()));
  } catch (const DimensionError& e) {
    throw DimensionError(fmt::format("{}: {}", context, e.what()));
  }
}

std::string context_of(const std::string& command, const RunConfig& cfg) {
  return fmt::format("{} ({})", command, to_string(cfg.algorithm));
}

}  // namespace

// --- names ----------------------------------------------------------------------

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::two_table: return "two-table";
    case Algorithm::general: return "general";
    case Algorithm::faq_exact: return "faq-exact";
    case Algorithm::materialize_oracle: return "materialize-oracle";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  for (const auto a : {Algorithm::two_table, Algorithm::general, Algorithm::faq_exact, Algorithm::materialize_oracle})
    if (to_string(a) == s) return a;
  throw ConfigError(fmt::format("unknown algorithm '{}' (two-table, general, faq-exact, materialize-oracle)", s));
}

std::string to_string(Mode m) { return m == Mode::dense ? "dense" : "sparse"; }

Mode parse_mode(const std::string& s) {
  if (s == "dense") return Mode::dense;
  if (s == "sparse") return Mode::sparse;
  throw ConfigError(fmt::format("unknown mode '{}' (dense, sparse)", s));
}

// --- config ---------------------------------------------------------------------

void RunConfig::validate() const {
  if (tables.empty() && !synth) throw ConfigError("config lists no tables and no synthetic shape");
  if (synth) synth->validate();
  std::set<std::string> names;
  for (const auto& t : tables) {
    if (t.name.empty() || t.path.empty()) throw ConfigError("every table needs a name and a path");
    if (!names.insert(t.name).second) throw ConfigError(fmt::format("table name '{}' used twice", t.name));
  }
  if (!(epsilon > 0 && epsilon < 1)) throw ConfigError(fmt::format("epsilon must be in (0, 1), got {}", epsilon));
  if (!(eps0 > 0 && eps0 < 1)) throw ConfigError(fmt::format("eps0 must be in (0, 1), got {}", eps0));
  if (!(lambda >= 0)) throw ConfigError(fmt::format("lambda must be >= 0, got {}", lambda));
  if (k && *k <= 0) throw ConfigError(fmt::format("k must be positive, got {}", *k));
  if (threads < 1) throw ConfigError(fmt::format("threads must be >= 1, got {}", threads));
  if (!(validation_fraction >= 0 && validation_fraction < 1))
    throw ConfigError(fmt::format("validation_fraction must be in [0, 1), got {}", validation_fraction));
  if (sweep) {
    static const std::set<std::string> params = {"k", "lambda", "epsilon", "n"};
    static const std::set<std::string> commands = {"embed", "regress", "ridge"};
    if (!params.count(sweep->parameter))
      throw ConfigError(fmt::format("unknown sweep parameter '{}' (k, lambda, epsilon, n)", sweep->parameter));
    if (!commands.count(sweep->command))
      throw ConfigError(fmt::format("unknown sweep command '{}' (embed, regress, ridge)", sweep->command));
    if (sweep->values.empty()) throw ConfigError("sweep has no values");
    if (sweep->parameter == "n" && !(tables.empty() && synth))
      throw ConfigError("an n sweep needs a synthetic shape instead of table files");
  }
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  check_fields(j,
               {"tables", "synth", "keys", "features", "target", "algorithm", "epsilon", "eps0", "lambda", "k", "mode",
                "seed", "threads", "normalize", "delimiter", "dictionary", "out", "sweep", "validation_fraction"},
               "config");
  RunConfig c;
  if (j.contains("tables")) {
    if (!j["tables"].is_array()) throw ConfigError("config field 'tables' must be an array");
    for (const auto& t : j["tables"]) {
      check_fields(t, {"name", "path"}, "table entry");
      c.tables.push_back({get<std::string>(t, "name"), get<std::string>(t, "path")});
    }
  }
  if (j.contains("synth")) c.synth = parse_synth(j["synth"]);
  if (j.contains("keys")) c.keys = get<std::vector<std::string>>(j, "keys");
  if (j.contains("features")) c.features = get<std::vector<std::string>>(j, "features");
  if (j.contains("target")) c.target = get<std::string>(j, "target");
  if (j.contains("algorithm")) c.algorithm = parse_algorithm(get<std::string>(j, "algorithm"));
  if (j.contains("epsilon")) c.epsilon = get<double>(j, "epsilon");
  if (j.contains("eps0")) c.eps0 = get<double>(j, "eps0");
  if (j.contains("lambda")) c.lambda = get<double>(j, "lambda");
  if (j.contains("k") && !j["k"].is_null()) c.k = get<Index>(j, "k");
  if (j.contains("mode")) c.mode = parse_mode(get<std::string>(j, "mode"));
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed");
  if (j.contains("threads")) c.threads = get<int>(j, "threads");
  if (j.contains("normalize")) c.normalize = get<bool>(j, "normalize");
  if (j.contains("delimiter")) {
    const auto d = get<std::string>(j, "delimiter");
    if (d.size() != 1) throw ConfigError("config field 'delimiter' must be a single character");
    c.delimiter = d[0];
  }
  if (j.contains("dictionary")) c.dictionary = get<std::string>(j, "dictionary");
  if (j.contains("out")) c.out = get<std::string>(j, "out");
  if (j.contains("validation_fraction")) c.validation_fraction = get<double>(j, "validation_fraction");
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    check_fields(s, {"parameter", "values", "command"}, "sweep");
    Sweep sw;
    sw.parameter = get<std::string>(s, "parameter");
    sw.values = get<std::vector<double>>(s, "values");
    if (s.contains("command")) sw.command = get<std::string>(s, "command");
    c.sweep = sw;
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse_config(ss.str());
  // Relative table paths are taken from the config's directory.
  const auto base = std::filesystem::path(path).parent_path();
  for (auto& t : c.tables)
    if (std::filesystem::path(t.path).is_relative()) t.path = (base / t.path).string();
  return c;
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["tables"] = json::array();
  for (const auto& t : c.tables) j["tables"].push_back({{"name", t.name}, {"path", t.path}});
  if (c.synth) j["synth"] = synth_json(*c.synth);
  j["keys"] = c.keys;
  j["features"] = c.features;
  j["target"] = c.target;
  j["algorithm"] = to_string(c.algorithm);
  j["epsilon"] = c.epsilon;
  j["eps0"] = c.eps0;
  j["lambda"] = c.lambda;
  j["k"] = c.k ? json(*c.k) : json(nullptr);
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["normalize"] = c.normalize;
  j["delimiter"] = std::string(1, c.delimiter);
  if (!c.dictionary.empty()) j["dictionary"] = c.dictionary;
  if (!c.out.empty()) j["out"] = c.out;
  j["validation_fraction"] = c.validation_fraction;
  if (c.sweep)
    j["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}, {"command", c.sweep->command}};
  return j.dump(2) + "\n";
}

// --- ingestion ------------------------------------------------------------------

Dataset ingest(const RunConfig& cfg) {
  cfg.validate();
  Dataset data;
  if (cfg.tables.empty()) {
    data.tables = synth_generate(*cfg.synth, Seed(cfg.seed));
    if (cfg.normalize) {
      const auto keys = shared_columns(data.tables);
      for (auto& t : data.tables) {
        std::vector<Index> cols;
        for (Index c = 0; c < t.cols(); ++c)
          if (std::find(keys.begin(), keys.end(), t.columns[static_cast<std::size_t>(c)]) == keys.end())
            cols.push_back(c);
        normalize_minmax(t, cols);
      }
    }
    return data;
  }
  CsvOptions opt;
  opt.delimiter = cfg.delimiter;
  opt.normalize = cfg.normalize;
  for (const auto& src : cfg.tables) {
    const auto header = header_of(src.path, cfg.delimiter);
    std::vector<std::string> keys;
    for (const auto& k : cfg.keys)
      if (std::find(header.begin(), header.end(), k) != header.end()) keys.push_back(k);
    data.tables.push_back(read_csv(src.path, src.name, keys, data.dictionary, opt));
  }
  if (!cfg.dictionary.empty()) data.dictionary.save(cfg.dictionary);
  return data;
}

RunConfig write_synth(const RunConfig& cfg, const std::string& dir) {
  if (!cfg.synth) throw ConfigError("synth needs a synthetic shape");
  const auto tables = synth_generate(*cfg.synth, Seed(cfg.seed));
  const auto paths = write_tables(tables, dir);
  RunConfig out = cfg;
  out.synth.reset();
  out.sweep.reset();
  out.tables.clear();
  for (std::size_t j = 0; j < tables.size(); ++j)
    out.tables.push_back({tables[j].name, std::filesystem::path(paths[j]).filename().string()});
  out.keys = shared_columns(tables);
  if (out.target.empty() && cfg.synth->target_noise >= 0) out.target = "y";
  std::ofstream(std::filesystem::path(dir) / "config.json") << config_to_json(out);
  return out;
}

// --- reports --------------------------------------------------------------------

double relative_error(double residual, double baseline_residual) {
  const double r2 = residual * residual, b2 = baseline_residual * baseline_residual;
  return b2 > 0 ? (r2 - b2) / b2 : r2;
}

std::string report_json(const Report& r) {
  json j;
  j["command"] = r.command;
  j["algorithm"] = r.algorithm;
  j["seed"] = r.seed;
  j["epsilon"] = number_or_null(r.epsilon);
  j["lambda"] = number_or_null(r.lambda);
  j["k"] = r.k >= 0 ? json(r.k) : json(nullptr);
  j["tables"] = r.tables;
  j["join_rows"] = r.join_rows;
  j["dim"] = r.dim;
  j["features"] = r.features;
  j["sketch_rows"] = r.sketch_rows;
  j["rank"] = r.rank;
  j["iterations"] = r.iterations;
  j["status"] = r.status;
  j["residual"] = number_or_null(r.residual);
  j["baseline_residual"] = number_or_null(r.baseline_residual);
  j["objective"] = number_or_null(r.objective);
  j["baseline_objective"] = number_or_null(r.baseline_objective);
  j["err"] = number_or_null(r.err);
  j["mse"] = number_or_null(r.mse);
  j["baseline_mse"] = number_or_null(r.baseline_mse);
  j["validation_rows"] = r.validation_rows;
  j["eig_min"] = number_or_null(r.eig_min);
  j["eig_max"] = number_or_null(r.eig_max);
  if (!r.sweep_parameter.empty()) {
    j["sweep_parameter"] = r.sweep_parameter;
    j["sweep_value"] = number_or_null(r.sweep_value);
  }
  j["x"] = std::vector<double>(r.x.data(), r.x.data() + r.x.size());
  j["phases"] = json::array();
  for (const auto& p : r.phases) j["phases"].push_back({{"phase", p.phase}, {"seconds", p.seconds}, {"touched", p.touched}});
  return j.dump(2);
}

std::string csv_header() {
  return "command,algorithm,seed,epsilon,lambda,k,tables,join_rows,dim,features,sketch_rows,rank,iterations,status,"
         "residual,baseline_residual,objective,baseline_objective,err,mse,baseline_mse,validation_rows,eig_min,eig_max,"
         "sweep_parameter,sweep_value";
}

std::string csv_row(const Report& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", r.command,
                     r.algorithm, r.seed, csv_number(r.epsilon), csv_number(r.lambda),
                     r.k >= 0 ? fmt::format("{}", r.k) : std::string(), r.tables, r.join_rows, r.dim, r.features,
                     r.sketch_rows, r.rank, r.iterations, r.status, csv_number(r.residual),
                     csv_number(r.baseline_residual), csv_number(r.objective), csv_number(r.baseline_objective),
                     csv_number(r.err), csv_number(r.mse), csv_number(r.baseline_mse), r.validation_rows,
                     csv_number(r.eig_min), csv_number(r.eig_max), r.sweep_parameter, csv_number(r.sweep_value));
}

void write_report(const std::vector<Report>& reports, const std::string& out) {
  if (out.empty()) throw ConfigError("no output path");
  const auto parent = std::filesystem::path(out).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  {
    std::ofstream js(out + ".json");
    if (!js) throw DataError(fmt::format("cannot write '{}.json'", out));
    if (reports.size() == 1) {
      js << report_json(reports[0]) << "\n";
    } else {
      js << "[\n";
      for (std::size_t i = 0; i < reports.size(); ++i) js << report_json(reports[i]) << (i + 1 < reports.size() ? ",\n" : "\n");
      js << "]\n";
    }
  }
  const std::string csv = out + ".csv";
  const bool fresh = !std::filesystem::exists(csv) || std::filesystem::file_size(csv) == 0;
  std::ofstream cs(csv, std::ios::app);
  if (!cs) throw DataError(fmt::format("cannot write '{}'", csv));
  if (fresh) cs << csv_header() << "\n";
  for (const auto& r : reports) cs << csv_row(r) << "\n";
}

// --- numerics -------------------------------------------------------------------

std::pair<double, double> spectral_range(const MatrixXd& gram, const MatrixXd& sketch_gram) {
  require_dims(gram.rows() == gram.cols() && sketch_gram.rows() == gram.rows() && sketch_gram.cols() == gram.cols(),
               "spectral_range: grams must be square of equal size");
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
  const VectorXd& ev = es.eigenvalues();
  const double cut = 1e-10 * std::max(ev.size() ? ev.maxCoeff() : 0.0, 1e-300);
  std::vector<Index> keep;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > cut) keep.push_back(i);
  if (keep.empty()) return {1.0, 1.0};
  MatrixXd w(gram.rows(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    w.col(static_cast<Index>(j)) = es.eigenvectors().col(keep[j]) / std::sqrt(ev(keep[j]));
  const Eigen::SelfAdjointEigenSolver<MatrixXd> em(w.transpose() * sketch_gram * w, Eigen::EigenvaluesOnly);
  return {em.eigenvalues().minCoeff(), em.eigenvalues().maxCoeff()};
}

std::vector<bool> validation_rows(const Table& t1, const std::vector<std::string>& keys, double fraction,
                                  std::uint64_t seed) {
  std::vector<Index> cols;
  for (const auto& k : keys)
    if (auto c = t1.find(k)) cols.push_back(*c);
  const Seed s = Seed(seed).derive(kSplitStream);
  std::vector<bool> out(static_cast<std::size_t>(t1.rows()));
  for (Index r = 0; r < t1.rows(); ++r) {
    std::uint64_t h = cols.empty() ? static_cast<std::uint64_t>(r) : 0x2545f4914f6cdd1dULL;
    for (const Index c : cols) h = detail::splitmix64(h ^ static_cast<std::uint64_t>(key_value(t1.values(r, c))));
    const double u = static_cast<double>(hash64(s, 0, h) >> 11) * 0x1.0p-53;
    out[static_cast<std::size_t>(r)] = u < fraction;
  }
  return out;
}

// --- commands -------------------------------------------------------------------

Report run_embed(const RunConfig& cfg, const Dataset& data) {
  return with_context(context_of("embed", cfg), [&] {
    const Setup s = prepare(cfg, data.tables, false);
    Report r = base_report("embed", cfg, s);
    Stopwatch clock;
    MatrixXd sketch;
    if (cfg.algorithm == Algorithm::two_table) {
      const Embedding emb = subspace_embed(*s.join, embed_config(cfg, cfg.epsilon));
      for (const auto& ph : emb.phases) r.phases.push_back({"embed/" + ph.phase, ph.seconds, ph.touched});
      sketch = emb.matrix;
    } else if (cfg.algorithm == Algorithm::general) {
      sketch = general_ridge_sketch(s.query, cfg.epsilon, 0.0, Seed(cfg.seed), cfg.k);
      r.phases.push_back({"sketch", clock.lap(), sketch.size()});
    } else {
      throw ConfigError("embed runs the two-table or general algorithm");
    }
    clock.lap();
    const GramMatrix g = gram_via_faq(s.query);
    r.phases.push_back({"baseline/gram", clock.lap(), g.evaluations});
    r.sketch_rows = sketch.rows();
    const MatrixXd sg = sketch.rows() ? MatrixXd(sketch.transpose() * sketch) : MatrixXd::Zero(r.dim, r.dim);
    std::tie(r.eig_min, r.eig_max) = spectral_range(g.gram, sg);
    const double lo = (1 - cfg.epsilon) * (1 - cfg.epsilon), hi = (1 + cfg.epsilon) * (1 + cfg.epsilon);
    r.status = r.eig_min >= lo && r.eig_max <= hi ? "pass" : "fail";
    return r;
  });
}

Report run_regress(const RunConfig& cfg, const Dataset& data) {
  return with_context(context_of("regress", cfg), [&] {
    const Setup s = prepare(cfg, data.tables, true);
    Report r = base_report("regress", cfg, s);
    r.lambda = 0;
    const Solution base = solve_exact_faq(s.query, s.features, s.target);
    Solution ours;
    switch (cfg.algorithm) {
      case Algorithm::two_table: ours = solve_regression(problem_for(cfg, s)); break;
      case Algorithm::general:
        ours = solve_ridge_sketched(s.query, s.features, s.target, 0.0, cfg.epsilon, Seed(cfg.seed), cfg.k);
        break;
      case Algorithm::faq_exact: ours = base; break;
      case Algorithm::materialize_oracle: ours = solve_materialized(s.query, s.features, s.target, 0.0); break;
    }
    take_solution(r, ours);
    take_solution(r, base, "baseline/");
    r.sketch_rows = ours.sketch_rows;
    r.rank = ours.rank;
    r.iterations = ours.iterations;
    r.status = to_string(ours.status);
    r.residual = ours.residual;
    r.baseline_residual = base.residual;
    r.objective = ours.residual * ours.residual;
    r.baseline_objective = base.residual * base.residual;
    r.err = relative_error(ours.residual, base.residual);
    r.x = ours.x;
    return r;
  });
}

Report run_ridge(const RunConfig& cfg, const Dataset& data) {
  return with_context(context_of("ridge", cfg), [&] {
    if (data.tables.empty()) throw ConfigError("no tables");
    const auto keys = resolved_keys(cfg, data.tables);
    const auto mask = validation_rows(data.tables[0], keys, cfg.validation_fraction, cfg.seed);
    std::vector<Index> train_rows, valid_rows;
    for (Index i = 0; i < data.tables[0].rows(); ++i)
      (mask[static_cast<std::size_t>(i)] ? valid_rows : train_rows).push_back(i);
    if (train_rows.empty()) throw DataError("the training split is empty");
    auto train = data.tables;
    train[0] = data.tables[0].select_rows(train_rows);
    const Setup s = prepare(cfg, std::move(train), true);
    Report r = base_report("ridge", cfg, s);

    const Solution base = solve_ridge_exact(s.query, s.features, s.target, cfg.lambda);
    Solution ours;
    switch (cfg.algorithm) {
      case Algorithm::two_table: ours = solve_ridge_sketched(problem_for(cfg, s), cfg.lambda); break;
      case Algorithm::general:
        ours = solve_ridge_sketched(s.query, s.features, s.target, cfg.lambda, cfg.epsilon, Seed(cfg.seed), cfg.k);
        break;
      case Algorithm::faq_exact: ours = base; break;
      case Algorithm::materialize_oracle:
        ours = solve_materialized(s.query, s.features, s.target, cfg.lambda);
        break;
    }
    take_solution(r, ours);
    take_solution(r, base, "baseline/");
    r.sketch_rows = ours.sketch_rows;
    r.rank = ours.rank;
    r.iterations = ours.iterations;
    r.status = to_string(ours.status);
    r.residual = ours.residual;
    r.baseline_residual = base.residual;
    r.objective = ridge_objective(s.query, s.features, s.target, ours.x, cfg.lambda);
    r.baseline_objective = ridge_objective(s.query, s.features, s.target, base.x, cfg.lambda);
    r.err = r.baseline_objective > 0 ? (r.objective - r.baseline_objective) / r.baseline_objective : r.objective;
    r.x = ours.x;

    if (!valid_rows.empty()) {
      auto valid = data.tables;
      valid[0] = data.tables[0].select_rows(valid_rows);
      RunConfig vcfg = cfg;
      vcfg.algorithm = Algorithm::faq_exact;
      const Setup v = prepare(vcfg, std::move(valid), true);
      r.validation_rows = count_rows(v.query);
      if (r.validation_rows > 0) {
        const auto n = static_cast<double>(r.validation_rows);
        const Index d = v.query.dim();
        r.mse = join_quadratic(v.query, residual_direction(d, v.features, v.target, ours.x)) / n;
        r.baseline_mse = join_quadratic(v.query, residual_direction(d, v.features, v.target, base.x)) / n;
      }
    }
    return r;
  });
}

Report run_gram(const RunConfig& cfg, const Dataset& data, MatrixXd& gram, std::vector<std::string>& columns) {
  return with_context(context_of("gram", cfg), [&] {
    const Setup s = prepare(cfg, data.tables, false);
    Report r = base_report("gram", cfg, s);
    Stopwatch clock;
    const GramMatrix g = gram_via_faq(s.query);
    r.phases.push_back({"baseline/gram", clock.lap(), g.evaluations});
    columns = g.columns;
    switch (cfg.algorithm) {
      case Algorithm::two_table:
        gram = implicit_gram(*s.join, cfg.threads);
        r.phases.push_back({"gram", clock.lap(), s.join->padded1.size() + s.join->padded2.size()});
        break;
      case Algorithm::general: {
        const MatrixXd sk = general_ridge_sketch(s.query, cfg.epsilon, 0.0, Seed(cfg.seed), cfg.k);
        gram = sk.transpose() * sk;
        r.sketch_rows = sk.rows();
        r.phases.push_back({"sketch", clock.lap(), sk.size()});
        break;
      }
      case Algorithm::faq_exact: gram = g.gram; break;
      case Algorithm::materialize_oracle: {
        const MatrixXd j = materialize_query(s.query);
        gram = j.transpose() * j;
        r.phases.push_back({"materialize", clock.lap(), j.size()});
        break;
      }
    }
    const double scale = std::max(g.gram.norm(), 1e-300);
    r.err = (gram - g.gram).norm() / scale;
    r.status = "ok";
    return r;
  });
}

std::vector<Report> run_bench(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.sweep) throw ConfigError("bench needs a sweep in the config");
  const Sweep& sw = *cfg.sweep;
  std::optional<Dataset> shared;
  if (sw.parameter != "n") shared = ingest(cfg);
  std::vector<Report> out;
  for (const double v : sw.values) {
    RunConfig c = cfg;
    c.sweep.reset();
    if (sw.parameter == "k") {
      c.k = static_cast<Index>(std::llround(v));
    } else if (sw.parameter == "lambda") {
      c.lambda = v;
    } else if (sw.parameter == "epsilon") {
      c.epsilon = v;
    } else {
      // n sets the first table's rows; the other tables keep their ratio to it.
      auto& rows = c.synth->rows;
      const double base = static_cast<double>(cfg.synth->rows[0]);
      for (std::size_t j = 0; j < rows.size(); ++j)
        rows[j] = std::max<Index>(1, static_cast<Index>(std::llround(v * static_cast<double>(cfg.synth->rows[j]) / base)));
    }
    c.validate();
    const Dataset data = shared ? *shared : ingest(c);
    Report r = sw.command == "embed" ? run_embed(c, data) : sw.command == "ridge" ? run_ridge(c, data) : run_regress(c, data);
    r.sweep_parameter = sw.parameter;
    r.sweep_value = v;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace joinsketch
