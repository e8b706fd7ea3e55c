// Experiment runner: dataset generation, single runs, stepsize-grid sweeps,
// and trace diagnostics.  Exit codes: 0 success, 2 configuration error,
// 3 numeric divergence (partial trace emitted), 4 incomplete trace or
// missing snapshots.
#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "asgrad/diagnostics.hpp"
#include "asgrad/engine.hpp"
#include "asgrad/experiment.hpp"
#include "asgrad/sweep.hpp"
#include "asgrad/trace_io.hpp"

namespace {

using namespace asgrad;

struct CommonFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string data_flag;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  // repeated flags follow the same precedence rule as config-file layering:
  // the last occurrence wins
  cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option("--config", flags.config_path, "flat key=value config file");
  auto pass = [&flags](const std::string& key) {
    return [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); };
  };
  cmd->add_option_function<std::string>("--alpha", pass("data.alpha"), "synthetic alpha");
  cmd->add_option_function<std::string>("--beta", pass("data.beta"), "synthetic beta");
  cmd->add_option_function<std::string>("--n", pass("data.n"), "worker count");
  cmd->add_option_function<std::string>("--m", pass("data.m"), "samples per worker");
  cmd->add_option_function<std::string>("--d", pass("data.d"), "feature dimension");
  cmd->add_option_function<std::string>("--data-seed", pass("data.seed"), "dataset seed");
  cmd->add_option("--data", flags.data_flag, "dataset file (LibSVM text or flat binary)");
  cmd->add_option_function<std::string>("--dim", pass("data.dim"), "declared LibSVM dimension");
  cmd->add_option_function<std::string>("--lambda", pass("lambda"), "regularization weight");
  cmd->add_option_function<std::string>("--strategy", pass("strategy"), "assignment strategy");
  cmd->add_option_function<std::string>("--gamma", pass("gamma"), "stepsize");
  cmd->add_option_function<std::string>("--grid", pass("grid"), "stepsize grid (comma list)");
  cmd->add_option_function<std::string>("-T,--iters", pass("T"), "iteration budget");
  cmd->add_option_function<std::string>("--batch", pass("batch"), "batch size or 'full'");
  cmd->add_option_function<std::string>("--timing", pass("timing"), "timing kind");
  cmd->add_option_function<std::string>("--timing-s", pass("timing.s"), "per-worker speeds");
  cmd->add_option_function<std::string>("--seeds", pass("seeds"), "seed list for sweeps");
  cmd->add_option_function<std::string>("--seed", pass("seed"), "run seed");
  cmd->add_option_function<std::string>("-o,--out", pass("out"), "output directory");
  cmd->add_option_function<std::string>("--cadence", pass("snapshot_cadence"),
                                        "snapshot cadence");
  cmd->add_option_function<std::string>("--tau", pass("tau"), "correlation period");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig cfg;
  if (!flags.config_path.empty()) load_config_file(cfg, flags.config_path);
  if (!flags.data_flag.empty()) {
    apply_config_value(cfg, "data.path", flags.data_flag);
    apply_config_value(cfg, "data.kind",
                       is_binary_dataset(flags.data_flag) ? "binary" : "libsvm");
  }
  for (const auto& [key, value] : flags.overrides) apply_config_value(cfg, key, value);
  return cfg;
}

std::string require_out_dir(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("missing output directory (-o/--out)");
  std::filesystem::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

int cmd_gen_data(const SynConfig& syn, const std::string& out_path) {
  const Dataset ds = generate_synthetic(syn);
  save_dataset(ds, out_path);
  std::ofstream manifest(out_path + ".manifest");
  if (!manifest) throw IoError("cannot write manifest for " + out_path);
  manifest << "format = asgd-flat-v1\n"
           << "alpha = " << fmt17(syn.alpha) << "\n"
           << "beta = " << fmt17(syn.beta) << "\n"
           << "n = " << syn.n << "\n"
           << "m = " << syn.m << "\n"
           << "d = " << syn.d << "\n"
           << "seed = " << syn.seed << "\n";
  std::cout << "wrote " << out_path << " (n=" << ds.n << ", m=" << ds.m << ", d=" << ds.d
            << ")\n";
  return 0;
}

int cmd_run(const CommonFlags& flags, const std::string& snapshots_path) {
  const ExperimentConfig cfg = resolve_config(flags);
  const std::string out = require_out_dir(cfg);
  auto problem = build_problem(cfg);
  const RunConfig rc = make_run_config(cfg);
  const Trace trace = run(*problem->objective, rc);

  write_trace_csv(trace, out + "/trace.csv");
  if (!snapshots_path.empty()) save_snapshots(trace, snapshots_path);

  const double final_gnorm = norm_sq(problem->objective->global_grad(trace.x_final));
  double min_gnorm = final_gnorm;
  for (const auto& rec : trace.records) min_gnorm = std::min(min_gnorm, rec.grad_norm_sq);
  {
    std::ofstream summary(out + "/summary.csv");
    if (!summary) throw IoError("cannot write summary.csv");
    summary << "final_grad_norm_sq,min_grad_norm_sq,wall_iters\n"
            << fmt17(final_gnorm) << ',' << fmt17(min_gnorm) << ',' << trace.T << '\n';
  }
  std::cout << fmt17(final_gnorm) << ',' << fmt17(min_gnorm) << ',' << trace.T << '\n';
  return trace.diverged_at >= 0 ? 3 : 0;
}

int cmd_sweep(const CommonFlags& flags) {
  const ExperimentConfig cfg = resolve_config(flags);
  const std::string out = require_out_dir(cfg);
  auto problem = build_problem(cfg);
  RunConfig rc = make_run_config(cfg);
  const std::vector<double> grid = cfg.grid.empty() ? default_gamma_grid() : cfg.grid;
  const SweepResult result =
      run_sweep(*problem->objective, rc, grid, cfg.seeds, out, 0);
  std::cout << "best_gamma " << fmt17(result.best_gamma) << '\n';
  return 0;
}

void emit_delay_rows(const DelayStats& ds,
                     std::vector<std::pair<std::string, double>>& rows) {
  rows.emplace_back("tau_avg", ds.tau_avg);
  rows.emplace_back("tau_max", static_cast<double>(ds.tau_max));
  rows.emplace_back("tilde_tau_avg", ds.tilde_tau_avg);
  rows.emplace_back("tilde_tau_max", static_cast<double>(ds.tilde_tau_max));
  rows.emplace_back("tau_c", static_cast<double>(ds.tau_c));
}

int cmd_diagnose(const CommonFlags& flags, const std::string& ledger_path,
                 const std::string& verify_trace_csv) {
  if (!ledger_path.empty()) {
    const ExperimentConfig cfg = resolve_config(flags);
    const std::string out = require_out_dir(cfg);
    const Trace trace = read_ledger_csv(ledger_path);
    std::vector<std::pair<std::string, double>> rows;
    emit_delay_rows(delay_stats(trace), rows);
    write_kv_csv(rows, out + "/diagnostics.csv");
    std::cout << "wrote " << out << "/diagnostics.csv\n";
    return 0;
  }

  const ExperimentConfig cfg = resolve_config(flags);
  const std::string out = require_out_dir(cfg);
  if (cfg.T < 1) throw ConfigError("diagnose needs T >= 1");
  auto problem = build_problem(cfg);
  const Objective& obj = *problem->objective;
  RunConfig rc = make_run_config(cfg);
  rc.store_job_gradients = true;
  const Trace trace = run(obj, rc);

  if (!verify_trace_csv.empty()) {
    const auto stored = read_trace_csv(verify_trace_csv);
    if (stored.size() != trace.records.size())
      throw ParameterError("--trace-csv does not match the deterministic re-run");
    for (std::size_t t = 0; t < stored.size(); ++t) {
      if (stored[t].i_t != trace.records[t].i_t ||
          stored[t].pi_t != trace.records[t].pi_t ||
          stored[t].grad_norm_sq != trace.records[t].grad_norm_sq)
        throw ParameterError("--trace-csv does not match the deterministic re-run");
    }
  }

  const auto probes = trajectory_probes(trace, 32);
  const double l_hat = obj.estimate_smoothness(probes);
  const ConstantsEstimate constants = obj.estimate_constants(probes);
  const double sigma_sq_hat = estimate_sigma_sq(obj, probes, rc.batch_size);
  const DelayStats ds = delay_stats(trace);
  const std::int64_t tau =
      cfg.tau > 0 ? std::min<std::int64_t>(cfg.tau, std::max<std::int64_t>(trace.T, 1))
                  : default_correlation_period(l_hat, trace.gamma_eff, trace.T);

  const CorrelationReport received =
      sequence_correlation(trace, tau, Process::kReceived, obj);
  const CorrelationReport assigned =
      sequence_correlation(trace, tau, Process::kAssigned, obj);
  const VirtualIterates virt = virtual_iterates(trace, tau, obj);
  const AssignedVirtualIterates avirt = assigned_virtual_iterates(trace, obj);

  double f_star_hat = obj.global_loss(trace.x_final);
  for (const auto& rec : trace.records) f_star_hat = std::min(f_star_hat, rec.loss);
  const double f0 = std::max(0.0, obj.global_loss(trace.x0) - f_star_hat);
  const double f1 =
      std::max(0.0, obj.global_loss(avirt.sequence.size() > 1 ? avirt.sequence[1]
                                                              : avirt.sequence[0]) -
                        f_star_hat);

  auto mean_of = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const double t_real = static_cast<double>(trace.T);
  const double phi = mean_of(received.sigma_sq_per_chunk) + received.nu_sq / t_real;
  const double phi_tilde = mean_of(assigned.sigma_sq_per_chunk) + assigned.nu_sq / t_real;
  const double bound3 =
      theorem3_bound(f0, l_hat, trace.gamma_eff, t_real, sigma_sq_hat, phi);
  const double bound4 =
      theorem4_bound(f1, l_hat, trace.gamma_eff, t_real, sigma_sq_hat,
                     static_cast<double>(ds.tau_c), constants.g, phi_tilde);

  std::vector<std::pair<std::string, double>> rows;
  rows.emplace_back("T", t_real);
  rows.emplace_back("gamma", trace.gamma);
  rows.emplace_back("gamma_eff", trace.gamma_eff);
  rows.emplace_back("tau", static_cast<double>(tau));
  emit_delay_rows(ds, rows);
  rows.emplace_back("nu_sq", received.nu_sq);
  rows.emplace_back("nu_sq_assigned", assigned.nu_sq);
  rows.emplace_back("sigma_sq_chunk_mean", mean_of(received.sigma_sq_per_chunk));
  rows.emplace_back("sigma_sq_chunk_mean_assigned", mean_of(assigned.sigma_sq_per_chunk));
  rows.emplace_back("virtual_gap_max", virt.max_gap);
  rows.emplace_back("lemma_max_residual", avirt.lemma_max_residual);
  rows.emplace_back("L_hat", l_hat);
  rows.emplace_back("zeta_sq_hat", constants.zeta_sq);
  rows.emplace_back("g_hat", constants.g);
  rows.emplace_back("sigma_sq_hat", sigma_sq_hat);
  rows.emplace_back("f0_hat", f0);
  rows.emplace_back("f1_hat", f1);
  rows.emplace_back("phi", phi);
  rows.emplace_back("phi_tilde", phi_tilde);
  rows.emplace_back("theorem3_bound", bound3);
  rows.emplace_back("theorem4_bound", bound4);
  try {
    StepsizeParams sp;
    sp.l_smooth = l_hat;
    const StrategySpec strat = parse_strategy_spec(cfg.strategy);
    const bool assigning_side = strat.kind == StrategyKind::kRandom ||
                                strat.kind == StrategyKind::kRandomWaiting ||
                                strat.kind == StrategyKind::kShuffled;
    sp.f_gap = assigning_side ? f1 : f0;
    sp.sigma_sq = sigma_sq_hat;
    sp.zeta_sq = constants.zeta_sq;
    sp.g_bound = constants.g;
    sp.t_iters = t_real;
    sp.tau_max = static_cast<double>(ds.tau_max);
    sp.tau_c = static_cast<double>(std::max<std::int64_t>(ds.tau_c, 1));
    sp.n = static_cast<double>(trace.n);
    sp.b = static_cast<double>(strat.b);
    rows.emplace_back("recommended_gamma", recommended_stepsize(strat.kind, sp));
  } catch (const ParameterError&) {
    // degenerate constants (e.g. L_hat == 0); omit the recommendation row
  }
  write_kv_csv(rows, out + "/diagnostics.csv");
  write_chunk_csv(received.sigma_sq_per_chunk, out + "/sigma_chunks_received.csv");
  write_chunk_csv(assigned.sigma_sq_per_chunk, out + "/sigma_chunks_assigned.csv");
  std::cout << "wrote " << out << "/diagnostics.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asynchronous SGD simulator and diagnostics"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset file");
  SynConfig syn;
  std::string gen_out;
  gen->add_option("--alpha", syn.alpha, "heterogeneity of the label rules");
  gen->add_option("--beta", syn.beta, "heterogeneity of the feature means");
  gen->add_option("--n", syn.n, "worker count");
  gen->add_option("--m", syn.m, "samples per worker");
  gen->add_option("--d", syn.d, "feature dimension");
  gen->add_option("--seed", syn.seed, "generator seed");
  gen->add_option("-o,--out", gen_out, "output file")->required();

  CommonFlags run_flags, sweep_flags, diag_flags;
  std::string snapshots_path, ledger_path, verify_trace_csv;
  auto* run_cmd = app.add_subcommand("run", "run one configuration");
  add_common_flags(run_cmd, run_flags);
  run_cmd->add_option("--snapshots", snapshots_path, "also dump snapshots (flat binary)");

  auto* sweep_cmd = app.add_subcommand("sweep", "stepsize grid search");
  add_common_flags(sweep_cmd, sweep_flags);

  auto* diag_cmd = app.add_subcommand("diagnose", "trace diagnostics");
  add_common_flags(diag_cmd, diag_flags);
  diag_cmd->add_option("--ledger", ledger_path, "delay stats from a ledger file only");
  diag_cmd->add_option("--trace-csv", verify_trace_csv,
                       "verify a stored trace CSV against the deterministic re-run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(syn, gen_out);
    if (run_cmd->parsed()) return cmd_run(run_flags, snapshots_path);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags);
    if (diag_cmd->parsed()) return cmd_diagnose(diag_flags, ledger_path, verify_trace_csv);
  } catch (const CadenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const IncompleteTraceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
