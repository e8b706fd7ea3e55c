// Stepsize-grid sweeps: run every (gamma, seed) pair, score each gamma by
// the median over seeds of the mean squared gradient norm over the last 10%
// of iterations, and pick the smallest-scoring gamma (ties go to the
// smaller stepsize).  Diverged runs score +infinity.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "asgrad/engine.hpp"
#include "asgrad/errors.hpp"
#include "asgrad/objective.hpp"
#include "asgrad/trace_io.hpp"

namespace asgrad {

inline std::vector<double> default_gamma_grid() {
  return {0.005, 0.004, 0.003, 0.002, 0.001, 0.0005, 0.0001};
}

struct RunScore {
  std::uint64_t seed = 0;
  double tail_mean = 0.0;       // mean grad_norm_sq over the last 10%
  double min_first_half = 0.0;  // running minimum before T/2
  bool diverged = false;
  std::vector<double> grad_norm_sq;  // per-iteration curve
};

struct GammaScore {
  double gamma = 0.0;
  std::vector<RunScore> runs;
  double median_tail = std::numeric_limits<double>::infinity();
};

struct SweepResult {
  std::vector<GammaScore> gammas;
  double best_gamma = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw ParameterError("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  if (v.size() % 2 == 1) return v[mid];
  return 0.5 * (v[mid - 1] + v[mid]);
}

inline double tail_mean_score(const std::vector<double>& curve, std::int64_t t_total) {
  if (curve.empty()) return std::numeric_limits<double>::infinity();
  const auto window = static_cast<std::size_t>(std::max<std::int64_t>(1, t_total / 10));
  if (curve.size() < window) return std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (std::size_t k = curve.size() - window; k < curve.size(); ++k) s += curve[k];
  return s / static_cast<double>(window);
}

inline int sweep_parallelism() {
  if (const char* env = std::getenv("ASGRAD_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Fan-out over the (gamma, seed) grid.  Each run writes nothing; the caller
// thread assembles files afterwards so output is deterministic.
inline SweepResult run_sweep(const Objective& obj, const RunConfig& base,
                             std::span<const double> grid, std::span<const std::uint64_t> seeds,
                             const std::string& out_dir = "", int threads = 0) {
  if (grid.empty()) throw ConfigError("sweep: empty stepsize grid");
  if (seeds.empty()) throw ConfigError("sweep: empty seed list");
  if (threads <= 0) threads = sweep_parallelism();

  struct Task {
    std::size_t gi;
    std::size_t si;
  };
  std::vector<Task> tasks;
  for (std::size_t gi = 0; gi < grid.size(); ++gi)
    for (std::size_t si = 0; si < seeds.size(); ++si) tasks.push_back({gi, si});

  SweepResult result;
  result.gammas.resize(grid.size());
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    result.gammas[gi].gamma = grid[gi];
    result.gammas[gi].runs.resize(seeds.size());
  }

  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = cursor.fetch_add(1);
      if (k >= tasks.size() || failed.load()) return;
      const Task task = tasks[k];
      try {
        RunConfig cfg = base;
        cfg.gamma = grid[task.gi];
        cfg.seed = seeds[task.si];
        cfg.snapshot_cadence = std::max<std::int64_t>(base.T, 1);
        cfg.store_job_gradients = false;
        cfg.fast_metrics = true;
        Trace trace = run(obj, cfg);
        RunScore& score = result.gammas[task.gi].runs[task.si];
        score.seed = cfg.seed;
        score.diverged = trace.diverged_at >= 0;
        score.grad_norm_sq.reserve(trace.records.size());
        for (const auto& rec : trace.records) score.grad_norm_sq.push_back(rec.grad_norm_sq);
        if (score.diverged) {
          score.tail_mean = std::numeric_limits<double>::infinity();
          score.min_first_half = std::numeric_limits<double>::infinity();
        } else {
          score.tail_mean = tail_mean_score(score.grad_norm_sq, base.T);
          double mn = std::numeric_limits<double>::infinity();
          const auto half = static_cast<std::size_t>(base.T / 2);
          for (std::size_t t = 0; t < score.grad_norm_sq.size() && t < half; ++t)
            mn = std::min(mn, score.grad_norm_sq[t]);
          score.min_first_half = mn;
        }
      } catch (const std::exception& e) {
        const std::lock_guard<std::mutex> lock(failure_mu);
        failure = e.what();
        failed.store(true);
        return;
      }
    }
  };

  const int pool = std::min<int>(threads, static_cast<int>(tasks.size()));
  std::vector<std::thread> threads_v;
  threads_v.reserve(static_cast<std::size_t>(pool));
  for (int i = 0; i < pool; ++i) threads_v.emplace_back(worker);
  for (auto& th : threads_v) th.join();
  if (failed.load()) throw Error("sweep run failed: " + failure);

  for (auto& gs : result.gammas) {
    std::vector<double> tails;
    tails.reserve(gs.runs.size());
    for (const auto& r : gs.runs) tails.push_back(r.tail_mean);
    gs.median_tail = median(std::move(tails));
  }
  result.best_gamma = result.gammas.front().gamma;
  double best = result.gammas.front().median_tail;
  for (const auto& gs : result.gammas) {
    if (gs.median_tail < best || (gs.median_tail == best && gs.gamma < result.best_gamma)) {
      best = gs.median_tail;
      result.best_gamma = gs.gamma;
    }
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream index(out_dir + "/gammas.csv");
    if (!index) throw IoError("cannot write " + out_dir + "/gammas.csv");
    index << "idx,gamma,median_tail_grad_norm_sq\n";
    for (std::size_t gi = 0; gi < result.gammas.size(); ++gi) {
      const auto& gs = result.gammas[gi];
      index << gi << ',' << fmt17(gs.gamma) << ',' << fmt17(gs.median_tail) << '\n';
      std::ofstream curve(out_dir + "/curve_g" + std::to_string(gi) + ".csv");
      if (!curve) throw IoError("cannot write sweep curve file");
      curve << kCurveCsvHeader << '\n';
      for (const auto& r : gs.runs) {
        for (std::size_t t = 0; t < r.grad_norm_sq.size(); ++t)
          curve << t << ',' << r.seed << ',' << fmt17(r.grad_norm_sq[t]) << '\n';
      }
    }
    std::ofstream best_out(out_dir + "/best_gamma.txt");
    if (!best_out) throw IoError("cannot write best_gamma.txt");
    best_out << fmt17(result.best_gamma) << '\n';
  }
  return result;
}

}  // namespace asgrad
