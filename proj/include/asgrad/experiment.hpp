// Experiment configuration shared by the CLI subcommands: a flat key-value
// config file (INI-like, `key = value`, `#` comments) with command-line
// flags taking precedence over file values.
//
// Keys: data.kind (synthetic|libsvm|binary), data.alpha, data.beta, data.n,
// data.m, data.d, data.seed, data.path, data.dim, lambda, strategy, gamma,
// grid, T, batch (count or "full"), timing (fixed|poisson|normal|uniform),
// timing.s (comma list; default s_i = i+1), seeds (comma list), seed, out,
// snapshot_cadence, store_gradients, tau.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "asgrad/dataset.hpp"
#include "asgrad/engine.hpp"
#include "asgrad/errors.hpp"
#include "asgrad/objective.hpp"
#include "asgrad/strategy.hpp"

namespace asgrad {

enum class DataKind { kSynthetic, kLibsvm, kBinary };

struct ExperimentConfig {
  DataKind data_kind = DataKind::kSynthetic;
  SynConfig syn{/*alpha=*/1.0, /*beta=*/1.0, /*n=*/10, /*m=*/200, /*d=*/300, /*seed=*/0};
  std::string data_path;
  std::int64_t data_n = 10;    // worker count for file-backed datasets
  std::int64_t data_dim = 0;   // declared LibSVM dimension (0 = from file)

  double lambda = 0.1;
  std::string strategy = "pure";
  double gamma = 1e-3;
  std::vector<double> grid;  // empty -> default grid when sweeping
  std::int64_t T = 1000;
  std::int64_t batch = 0;  // 0 = full local gradients
  TimingKind timing_kind = TimingKind::kFixed;
  std::vector<double> timing_s;  // empty -> s_i = i+1
  std::vector<std::uint64_t> seeds{0};
  std::uint64_t seed = 0;
  std::string out_dir;
  std::int64_t snapshot_cadence = 1;
  bool store_gradients = true;
  std::int64_t tau = 0;  // 0 = pick the theory default at diagnose time
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double cfg_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double r = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(key + ": bad number '" + v + "'");
  }
}

inline std::int64_t cfg_int(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const std::int64_t r = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(key + ": bad integer '" + v + "'");
  }
}

}  // namespace detail

inline void apply_config_value(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
  using detail::cfg_double;
  using detail::cfg_int;
  if (key == "data.kind") {
    if (value == "synthetic") cfg.data_kind = DataKind::kSynthetic;
    else if (value == "libsvm") cfg.data_kind = DataKind::kLibsvm;
    else if (value == "binary") cfg.data_kind = DataKind::kBinary;
    else throw ConfigError("data.kind: unknown '" + value + "'");
  } else if (key == "data.alpha") cfg.syn.alpha = cfg_double(value, key);
  else if (key == "data.beta") cfg.syn.beta = cfg_double(value, key);
  else if (key == "data.n") { cfg.syn.n = cfg_int(value, key); cfg.data_n = cfg.syn.n; }
  else if (key == "data.m") cfg.syn.m = cfg_int(value, key);
  else if (key == "data.d") cfg.syn.d = cfg_int(value, key);
  else if (key == "data.seed") cfg.syn.seed = static_cast<std::uint64_t>(cfg_int(value, key));
  else if (key == "data.path") cfg.data_path = value;
  else if (key == "data.dim") cfg.data_dim = cfg_int(value, key);
  else if (key == "lambda") cfg.lambda = cfg_double(value, key);
  else if (key == "strategy") cfg.strategy = value;
  else if (key == "gamma") cfg.gamma = cfg_double(value, key);
  else if (key == "grid") {
    cfg.grid.clear();
    for (const auto& g : detail::split_list(value)) cfg.grid.push_back(cfg_double(g, key));
  } else if (key == "T") cfg.T = cfg_int(value, key);
  else if (key == "batch") {
    cfg.batch = value == "full" ? 0 : cfg_int(value, key);
  } else if (key == "timing") cfg.timing_kind = parse_timing_kind(value);
  else if (key == "timing.s") {
    cfg.timing_s.clear();
    for (const auto& s : detail::split_list(value)) cfg.timing_s.push_back(cfg_double(s, key));
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& s : detail::split_list(value))
      cfg.seeds.push_back(static_cast<std::uint64_t>(cfg_int(s, key)));
    if (cfg.seeds.empty()) throw ConfigError("seeds: empty list");
  } else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(cfg_int(value, key));
  else if (key == "out") cfg.out_dir = value;
  else if (key == "snapshot_cadence") cfg.snapshot_cadence = cfg_int(value, key);
  else if (key == "store_gradients") cfg.store_gradients = value == "1" || value == "true";
  else if (key == "tau") cfg.tau = cfg_int(value, key);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline void load_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    apply_config_value(cfg, detail::trim(line.substr(0, eq)),
                       detail::trim(line.substr(eq + 1)));
  }
}

// Dataset + objective with a stable address for the objective's reference.
struct Problem {
  Dataset dataset;
  std::unique_ptr<Objective> objective;
};

inline bool is_binary_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  return in.gcount() == 4 && std::memcmp(magic, "ASGD", 4) == 0;
}

// Builds the dataset named by the config; single-node reductions
// (minibatch/rr) re-shard it so every data point is a client.
inline std::unique_ptr<Problem> build_problem(const ExperimentConfig& cfg) {
  auto problem = std::make_unique<Problem>();
  switch (cfg.data_kind) {
    case DataKind::kSynthetic:
      problem->dataset = generate_synthetic(cfg.syn);
      break;
    case DataKind::kLibsvm:
      problem->dataset = load_libsvm(cfg.data_path, cfg.data_n, cfg.data_dim);
      break;
    case DataKind::kBinary:
      problem->dataset = load_dataset(cfg.data_path);
      break;
  }
  const StrategySpec spec = parse_strategy_spec(cfg.strategy);
  if (spec.is_reduction()) problem->dataset = flatten_to_points(problem->dataset);
  problem->objective = std::make_unique<Objective>(problem->dataset, cfg.lambda);
  return problem;
}

inline RunConfig make_run_config(const ExperimentConfig& cfg) {
  RunConfig rc;
  rc.strategy = parse_strategy_spec(cfg.strategy);
  rc.gamma = cfg.gamma;
  rc.T = cfg.T;
  rc.batch_size = cfg.batch;
  rc.timing_kind = cfg.timing_kind;
  rc.timing.kind = cfg.timing_kind;
  rc.timing.s = cfg.timing_s;
  rc.seed = cfg.seed;
  rc.snapshot_cadence = cfg.snapshot_cadence;
  rc.store_job_gradients = cfg.store_gradients;
  return rc;
}

}  // namespace asgrad
