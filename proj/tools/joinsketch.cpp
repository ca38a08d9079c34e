// Command-line front end: embed, regress, ridge, gram, bench and synth over
// CSV tables described by a JSON config.

#include "joinsketch/runner.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace joinsketch;

enum Exit : int { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kAlgorithm = 4 };

struct Overrides {
  std::string config;
  std::optional<double> epsilon, lambda;
  std::optional<Index> k;
  std::optional<std::string> mode, algorithm;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
};

void add_common(CLI::App* cmd, Overrides& o, bool config_required) {
  auto* c = cmd->add_option("--config", o.config, "JSON run configuration");
  if (config_required) c->required();
  cmd->add_option("--epsilon", o.epsilon, "accuracy parameter");
  cmd->add_option("--lambda", o.lambda, "ridge penalty");
  cmd->add_option("--k", o.k, "sketch rows override");
  cmd->add_option("--mode", o.mode, "dense or sparse")->check(CLI::IsMember({"dense", "sparse"}));
  cmd->add_option("--algorithm", o.algorithm, "two-table, general, faq-exact or materialize-oracle");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--threads", o.threads, "worker threads");
  cmd->add_option("--out", o.out, "output prefix (directory for synth)");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.lambda) c.lambda = *o.lambda;
  if (o.k) c.k = *o.k;
  if (o.mode) c.mode = parse_mode(*o.mode);
  if (o.algorithm) c.algorithm = parse_algorithm(*o.algorithm);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (!o.out.empty()) c.out = o.out;
  return c;
}

void emit(const std::vector<Report>& reports, const RunConfig& c) {
  if (c.out.empty()) {
    for (const auto& r : reports) std::cout << report_json(r) << "\n";
  } else {
    write_report(reports, c.out);
    std::cerr << fmt::format("wrote {}.json and {}.csv\n", c.out, c.out);
  }
}

void write_gram(const MatrixXd& g, const std::vector<std::string>& cols, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path));
  out << "column";
  for (const auto& c : cols) out << "," << c;
  out << "\n";
  for (Index i = 0; i < g.rows(); ++i) {
    out << cols[static_cast<std::size_t>(i)];
    for (Index j = 0; j < g.cols(); ++j) out << fmt::format(",{}", g(i, j));
    out << "\n";
  }
}

std::vector<Index> parse_list(const std::string& s) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stoll(cell));
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("'{}' is not an integer list", s));
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subspace embeddings and regression over relational joins"};
  app.require_subcommand(1);

  Overrides o;
  auto* embed = app.add_subcommand("embed", "subspace embedding with a spectral check against the exact gram");
  auto* regress = app.add_subcommand("regress", "least squares against the exact FAQ baseline");
  auto* ridge = app.add_subcommand("ridge", "ridge regression with a held-out validation split");
  auto* gram = app.add_subcommand("gram", "J^T J of the join");
  auto* bench = app.add_subcommand("bench", "sweep over k, lambda, epsilon or n");
  auto* synth = app.add_subcommand("synth", "write synthetic chain-join tables and a config");
  for (auto* cmd : {embed, regress, ridge, gram, bench}) add_common(cmd, o, true);
  add_common(synth, o, false);

  std::string rows = "1000,1000", features = "3,3";
  std::int64_t cardinality = 100;
  std::vector<double> skew = {0.0};
  double noise = 0.1;
  synth->add_option("--rows", rows, "rows per table, comma separated");
  synth->add_option("--features", features, "features per table, comma separated");
  synth->add_option("--cardinality", cardinality, "distinct key values");
  synth->add_option("--skew", skew, "Zipf exponent, one or one per table (0 = round robin)");
  synth->add_option("--noise", noise, "target noise deviation (negative: no target)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    RunConfig c = resolve(o);
    if (synth->parsed()) {
      if (c.out.empty()) throw ConfigError("synth needs --out <directory>");
      if (!c.synth || synth->count("--rows") || synth->count("--features")) {
        SynthShape s = c.synth.value_or(SynthShape{});
        s.rows = parse_list(rows);
        s.features = parse_list(features);
        c.synth = s;
      }
      if (synth->count("--cardinality") || o.config.empty()) c.synth->key_cardinality = cardinality;
      if (synth->count("--skew") || o.config.empty()) c.synth->skew = skew;
      if (synth->count("--noise") || o.config.empty()) c.synth->target_noise = noise;
      const std::string dir = c.out;
      c.out.clear();
      write_synth(c, dir);
      std::cerr << fmt::format("wrote {} tables and config.json to {}\n", c.synth->rows.size(), dir);
      return kOk;
    }
    if (bench->parsed()) {
      emit(run_bench(c), c);
      return kOk;
    }
    const Dataset data = ingest(c);
    if (embed->parsed()) emit({run_embed(c, data)}, c);
    if (regress->parsed()) emit({run_regress(c, data)}, c);
    if (ridge->parsed()) emit({run_ridge(c, data)}, c);
    if (gram->parsed()) {
      MatrixXd g;
      std::vector<std::string> cols;
      const Report r = run_gram(c, data, g, cols);
      emit({r}, c);
      if (!c.out.empty()) write_gram(g, cols, c.out + ".gram.csv");
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const AlgorithmError& e) {
    std::cerr << "algorithm error: " << e.what() << "\n";
    return kAlgorithm;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
