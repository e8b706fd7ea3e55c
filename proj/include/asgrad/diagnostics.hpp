// Post-hoc theory quantities computed from traces: delay statistics,
// concurrency, sequence correlation, delay variance, both virtual-iterate
// sequences, the real-vs-virtual ledger identity check, explicit-constant
// bound evaluation, and tuned-stepsize rules.
//
// Conventions for the assigning process (the paper-side definitions leave
// them open):
//  - The assigned index sequence is the flattened assignment order: the
//    initial jobs first, then per-step assignments in burst order.  This is
//    exactly Trace::jobs order, so chunk k of period tau covers jobs
//    [k*tau, k*tau + tau).
//  - Assigned delays use spread consumption slots: a job assigned at step s
//    with burst position l is consumed at virtual update s + 1 + l, so a
//    buffered round of size b carries delays 0..b-1.  Initial jobs are
//    consumed by the first virtual update and carry delay 0.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "asgrad/engine.hpp"
#include "asgrad/errors.hpp"
#include "asgrad/linalg.hpp"
#include "asgrad/objective.hpp"

namespace asgrad {

enum class Process { kReceived, kAssigned };

struct DelayStats {
  double tau_avg = 0.0;
  std::int64_t tau_max = 0;
  double tilde_tau_avg = 0.0;
  std::int64_t tilde_tau_max = 0;
  std::int64_t tau_c = 0;
};

struct CorrelationReport {
  std::int64_t tau = 1;
  std::vector<double> sigma_sq_per_chunk;
  double nu_sq = 0.0;
  std::int64_t num_runs = 0;
};

namespace detail {

inline void require_finalized(const Trace& trace) {
  if (!trace.finalized) throw IncompleteTraceError("trace is not finalized");
}

// Consumption slot of a job under the spread convention (initial jobs -> 0).
inline std::int64_t consumption_slot(const JobRecord& job) {
  if (job.assign_step < 0) return 0;
  return job.assign_step + 1 + job.burst_pos;
}

// Worker-index sequences the two processes are chunked over.
inline std::vector<int> index_sequence(const Trace& trace, Process process) {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(trace.T));
  if (process == Process::kReceived) {
    for (const auto& rec : trace.records) idx.push_back(rec.i_t);
  } else {
    const auto count = std::min<std::int64_t>(trace.T,
                                              static_cast<std::int64_t>(trace.jobs.size()));
    for (std::int64_t k = 0; k < count; ++k)
      idx.push_back(trace.jobs[static_cast<std::size_t>(k)].worker);
  }
  return idx;
}

// Per-slot (worker, model) pairs of the spread assigned sequence; slots with
// no job are marked worker = -1.  Slot 0 aggregates the initial jobs.
struct SpreadSlot {
  std::vector<int> workers;
  std::int64_t alpha = -1;
};

inline std::vector<SpreadSlot> spread_slots(const Trace& trace) {
  std::vector<SpreadSlot> slots(static_cast<std::size_t>(trace.T));
  for (const auto& job : trace.jobs) {
    const std::int64_t c = consumption_slot(job);
    if (c < 0 || c >= trace.T) continue;
    auto& slot = slots[static_cast<std::size_t>(c)];
    slot.workers.push_back(job.worker);
    slot.alpha = slot.alpha < 0 ? job.model_index : std::min(slot.alpha, job.model_index);
  }
  return slots;
}

}  // namespace detail

// Average/maximum delays of the received (and assigned) process plus the
// concurrency maximum, including the second summand over unfinished jobs.
inline DelayStats delay_stats(const Trace& trace) {
  detail::require_finalized(trace);
  DelayStats out;
  const double total_jobs = static_cast<double>(trace.jobs.size());
  if (trace.jobs.empty()) return out;

  double sum = 0.0;
  std::int64_t mx = 0;
  for (const auto& rec : trace.records) {
    sum += static_cast<double>(rec.tau_t);
    mx = std::max(mx, rec.tau_t);
  }
  for (std::uint64_t id : trace.unfinished) {
    const std::int64_t v = trace.T - trace.jobs[id].model_index;
    sum += static_cast<double>(v);
    mx = std::max(mx, v);
  }
  out.tau_avg = sum / total_jobs;
  out.tau_max = mx;

  double tsum = 0.0;
  std::int64_t tmx = 0;
  for (const auto& job : trace.jobs) {
    const std::int64_t c = detail::consumption_slot(job);
    const std::int64_t v = (c <= trace.T - 1) ? c - job.model_index : trace.T - job.model_index;
    tsum += static_cast<double>(v);
    tmx = std::max(tmx, v);
  }
  out.tilde_tau_avg = tsum / total_jobs;
  out.tilde_tau_max = tmx;

  // Concurrency recomputed from the ledger history: in-flight at view v is
  // |initial + assigned before v| - |received before v|, v = 0..T.
  std::vector<std::int64_t> assigned_at(static_cast<std::size_t>(trace.T), 0);
  std::vector<std::int64_t> received_at(static_cast<std::size_t>(trace.T), 0);
  std::int64_t flight = 0;
  for (const auto& job : trace.jobs) {
    if (job.assign_step < 0) {
      ++flight;
    } else {
      ++assigned_at[static_cast<std::size_t>(job.assign_step)];
    }
    if (job.receive_step >= 0) ++received_at[static_cast<std::size_t>(job.receive_step)];
  }
  out.tau_c = flight;
  for (std::int64_t v = 1; v <= trace.T; ++v) {
    flight += assigned_at[static_cast<std::size_t>(v - 1)] -
              received_at[static_cast<std::size_t>(v - 1)];
    out.tau_c = std::max(out.tau_c, flight);
  }
  return out;
}

// Squared norms of the centered partial gradient sums for every chunk of one
// trace: result[k][j] = || sum_{t=k*tau}^{min(k*tau+j, T-1)}
// (grad f_{idx_t}(x_{k tau}) - grad f(x_{k tau})) ||^2.
inline std::vector<std::vector<double>> correlation_partial_sums(const Trace& trace,
                                                                 std::int64_t tau,
                                                                 Process process,
                                                                 const Objective& obj) {
  detail::require_finalized(trace);
  if (tau < 1) throw ParameterError("correlation period must be >= 1");
  const std::int64_t T = trace.T;
  const auto idx = detail::index_sequence(trace, process);
  const std::int64_t chunks = (T + tau - 1) / tau;
  std::vector<std::vector<double>> out(static_cast<std::size_t>(std::max<std::int64_t>(chunks, 0)));

  ParamVector mean_grad, gi, partial;
  std::vector<ParamVector> local(static_cast<std::size_t>(obj.num_workers()));
  std::vector<bool> have(static_cast<std::size_t>(obj.num_workers()));
  for (std::int64_t k = 0; k < chunks; ++k) {
    const ParamVector& x = trace.snapshot(k * tau);
    obj.global_grad(x, mean_grad);
    std::fill(have.begin(), have.end(), false);
    partial.assign(x.size(), 0.0);
    auto& row = out[static_cast<std::size_t>(k)];
    const std::int64_t jmax = std::min(tau - 1, T - 1 - k * tau);
    row.reserve(static_cast<std::size_t>(jmax + 1));
    for (std::int64_t j = 0; j <= jmax; ++j) {
      const auto w = static_cast<std::size_t>(idx[static_cast<std::size_t>(k * tau + j)]);
      if (!have[w]) {
        obj.local_grad(x, static_cast<std::int64_t>(w), local[w]);
        have[w] = true;
      }
      for (std::size_t c = 0; c < partial.size(); ++c)
        partial[c] += local[w][c] - mean_grad[c];
      row.push_back(norm_sq(partial));
    }
  }
  return out;
}

// Delay variance: sum over t of the squared norm of the centered gradient
// sum inside each delay window, using full local gradients at the stored
// snapshots (plug-in estimate; mean over traces when several are supplied).
inline double delay_variance(const Trace& trace, Process process, const Objective& obj) {
  detail::require_finalized(trace);
  const std::int64_t T = trace.T;
  if (T == 0) return 0.0;
  if (trace.snapshot_cadence != 1)
    throw CadenceError("delay variance needs snapshot cadence 1");

  ParamVector mean_grad, gi;
  std::vector<ParamVector> delta(static_cast<std::size_t>(T));
  std::vector<std::int64_t> window_lo(static_cast<std::size_t>(T));

  if (process == Process::kReceived) {
    for (std::int64_t j = 0; j < T; ++j) {
      const auto& rec = trace.records[static_cast<std::size_t>(j)];
      const ParamVector& x = trace.snapshot(rec.pi_t);
      obj.global_grad(x, mean_grad);
      obj.local_grad(x, rec.i_t, gi);
      auto& dj = delta[static_cast<std::size_t>(j)];
      dj.resize(x.size());
      for (std::size_t c = 0; c < x.size(); ++c) dj[c] = gi[c] - mean_grad[c];
      window_lo[static_cast<std::size_t>(j)] = rec.pi_t;
    }
  } else {
    const auto slots = detail::spread_slots(trace);
    for (std::int64_t j = 0; j < T; ++j) {
      const auto& slot = slots[static_cast<std::size_t>(j)];
      auto& dj = delta[static_cast<std::size_t>(j)];
      dj.assign(static_cast<std::size_t>(trace.d), 0.0);
      window_lo[static_cast<std::size_t>(j)] = j;  // empty window by default
      if (slot.workers.empty()) continue;
      const ParamVector& x = trace.snapshot(slot.alpha);
      obj.global_grad(x, mean_grad);
      for (int w : slot.workers) {
        obj.local_grad(x, w, gi);
        for (std::size_t c = 0; c < dj.size(); ++c) dj[c] += gi[c] - mean_grad[c];
      }
      window_lo[static_cast<std::size_t>(j)] = slot.alpha;
    }
  }

  double total = 0.0;
  ParamVector acc(static_cast<std::size_t>(trace.d));
  for (std::int64_t t = 0; t < T; ++t) {
    const std::int64_t lo = window_lo[static_cast<std::size_t>(t)];
    if (lo >= t) continue;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::int64_t j = lo; j < t; ++j) axpy(1.0, delta[static_cast<std::size_t>(j)], acc);
    total += norm_sq(acc);
  }
  return total;
}

inline double delay_variance(std::span<const Trace> traces, Process process,
                             const Objective& obj) {
  if (traces.empty()) throw ParameterError("delay_variance: no traces");
  double s = 0.0;
  for (const auto& t : traces) s += delay_variance(t, process, obj);
  return s / static_cast<double>(traces.size());
}

// Sequence correlation per chunk (expectations estimated as empirical means
// over the supplied traces) bundled with the matching delay variance.
inline CorrelationReport sequence_correlation(std::span<const Trace> traces, std::int64_t tau,
                                              Process process, const Objective& obj) {
  if (traces.empty()) throw ParameterError("sequence_correlation: no traces");
  const std::int64_t T = traces.front().T;
  for (const auto& t : traces) {
    if (t.T != T) throw ParameterError("sequence_correlation: traces differ in length");
  }
  CorrelationReport report;
  report.tau = tau;
  report.num_runs = static_cast<std::int64_t>(traces.size());

  std::vector<std::vector<double>> mean_sums;  // [chunk][j], averaged over traces
  for (const auto& trace : traces) {
    auto sums = correlation_partial_sums(trace, tau, process, obj);
    if (mean_sums.empty()) {
      mean_sums = std::move(sums);
    } else {
      for (std::size_t k = 0; k < sums.size(); ++k)
        for (std::size_t j = 0; j < sums[k].size(); ++j) mean_sums[k][j] += sums[k][j];
    }
  }
  const double inv = 1.0 / static_cast<double>(traces.size());
  report.sigma_sq_per_chunk.reserve(mean_sums.size());
  for (auto& row : mean_sums) {
    double mx = 0.0;
    for (double v : row) mx = std::max(mx, v * inv);
    report.sigma_sq_per_chunk.push_back(mx);
  }
  report.nu_sq = delay_variance(traces, process, obj);
  return report;
}

inline CorrelationReport sequence_correlation(const Trace& trace, std::int64_t tau,
                                              Process process, const Objective& obj) {
  return sequence_correlation(std::span<const Trace>(&trace, 1), tau, process, obj);
}

struct VirtualIterates {
  std::vector<ParamVector> sequence;
  double max_gap = 0.0;
};

// Full-gradient virtual iterates with restarts every tau steps and the
// maximum distance to the real trajectory.
inline VirtualIterates virtual_iterates(const Trace& trace, std::int64_t tau,
                                        const Objective& obj) {
  detail::require_finalized(trace);
  if (tau < 1) throw ParameterError("restart period must be >= 1");
  if (trace.snapshot_cadence != 1)
    throw CadenceError("virtual iterates need snapshot cadence 1");
  VirtualIterates out;
  out.sequence.reserve(static_cast<std::size_t>(trace.T + 1));
  out.sequence.push_back(trace.x0);
  ParamVector grad;
  for (std::int64_t t = 0; t < trace.T; ++t) {
    const ParamVector& xt = trace.snapshot(t);
    out.max_gap = std::max(out.max_gap, dist(xt, out.sequence.back()));
    if ((t + 1) % tau == 0) {
      out.sequence.push_back(trace.snapshot(t + 1));
    } else {
      ParamVector next = out.sequence.back();
      obj.global_grad(xt, grad);
      axpy(-trace.gamma_eff, grad, next);
      out.sequence.push_back(std::move(next));
    }
  }
  out.max_gap = std::max(out.max_gap, dist(trace.snapshot(trace.T), out.sequence.back()));
  return out;
}

struct AssignedVirtualIterates {
  std::vector<ParamVector> sequence;
  double lemma_max_residual = 0.0;
};

// Virtual iterates that follow the assigning process (the initial step
// consumes the whole initial assignment set), together with the maximum
// residual of the in-flight identity
//   x_t - y_t = gamma_eff * sum over in-flight jobs of g_i(x_j).
inline AssignedVirtualIterates assigned_virtual_iterates(const Trace& trace,
                                                         const Objective& obj) {
  (void)obj;
  detail::require_finalized(trace);
  if (trace.snapshot_cadence != 1)
    throw CadenceError("assigned virtual iterates need snapshot cadence 1");
  if (trace.job_gradients.size() != trace.jobs.size())
    throw IncompleteTraceError("job gradients missing");

  const std::int64_t T = trace.T;
  // bursts[t] = jobs consumed by the update producing y_{t+1}
  std::vector<std::vector<std::uint64_t>> bursts(static_cast<std::size_t>(std::max<std::int64_t>(T, 1)));
  std::vector<std::vector<std::uint64_t>> assigned_before(static_cast<std::size_t>(T + 1));
  std::vector<std::vector<std::uint64_t>> received_before(static_cast<std::size_t>(T + 1));
  for (std::size_t id = 0; id < trace.jobs.size(); ++id) {
    const auto& job = trace.jobs[id];
    if (job.assign_step < 0) {
      if (T > 0) bursts[0].push_back(id);
    } else if (job.assign_step + 1 < T) {
      bursts[static_cast<std::size_t>(job.assign_step + 1)].push_back(id);
    }
    // membership deltas for A_t: the initial set enters at t = 1, a job
    // assigned at step s enters at t = s + 2
    const std::int64_t enters_a = job.assign_step < 0 ? 1 : job.assign_step + 2;
    if (enters_a <= T) assigned_before[static_cast<std::size_t>(enters_a)].push_back(id);
    if (job.receive_step >= 0 && job.receive_step + 1 <= T)
      received_before[static_cast<std::size_t>(job.receive_step + 1)].push_back(id);
  }

  AssignedVirtualIterates out;
  out.sequence.reserve(static_cast<std::size_t>(T + 1));
  out.sequence.push_back(trace.x0);

  std::vector<std::uint64_t> in_flight;  // A_t \ R_t in job-id order
  ParamVector expected(static_cast<std::size_t>(trace.d));
  for (std::int64_t t = 0; t <= T; ++t) {
    if (t > 0) {
      ParamVector y = out.sequence.back();
      for (std::uint64_t id : bursts[static_cast<std::size_t>(t - 1)])
        axpy(-trace.gamma_eff, trace.job_gradient(id), y);
      out.sequence.push_back(std::move(y));
    }
    for (std::uint64_t id : assigned_before[static_cast<std::size_t>(t)]) in_flight.push_back(id);
    for (std::uint64_t id : received_before[static_cast<std::size_t>(t)])
      in_flight.erase(std::find(in_flight.begin(), in_flight.end(), id));

    std::fill(expected.begin(), expected.end(), 0.0);
    for (std::uint64_t id : in_flight) axpy(trace.gamma_eff, trace.job_gradient(id), expected);
    const ParamVector& xt = trace.snapshot(t);
    const ParamVector& yt = out.sequence.back();
    double res_sq = 0.0;
    for (std::size_t c = 0; c < expected.size(); ++c) {
      const double r = (xt[c] - yt[c]) - expected[c];
      res_sq += r * r;
    }
    out.lemma_max_residual = std::max(out.lemma_max_residual, std::sqrt(res_sq));
  }
  return out;
}

// Explicit-constant bound of the receiving-process theorem:
//   5 F0 / (gamma T) + 25 L gamma sigma^2 + 35000 L^2 gamma^2 Phi,
// with Phi = mean_k sigma^2_{k,tau} + nu^2 / T.
inline double theorem3_bound(double f0, double l_smooth, double gamma, double t_iters,
                             double sigma_sq, double phi) {
  if (!(gamma > 0.0) || !(t_iters > 0.0)) throw ParameterError("gamma, T must be > 0");
  if (f0 < 0.0 || l_smooth < 0.0 || sigma_sq < 0.0 || phi < 0.0)
    throw ParameterError("bound inputs must be >= 0");
  return 5.0 * f0 / (gamma * t_iters) + 25.0 * l_smooth * gamma * sigma_sq +
         35000.0 * l_smooth * l_smooth * gamma * gamma * phi;
}

// Explicit-constant bound of the assigning-process theorem:
//   7 F1 / (gamma T) + 2600 L^2 gamma^2 (tau_C - 1)^2 G^2
//   + 2600 L gamma sigma^2 + 106000 L^2 gamma^2 Phi~.
inline double theorem4_bound(double f1, double l_smooth, double gamma, double t_iters,
                             double sigma_sq, double tau_c, double g_bound,
                             double phi_tilde) {
  if (!(gamma > 0.0) || !(t_iters > 0.0)) throw ParameterError("gamma, T must be > 0");
  if (f1 < 0.0 || l_smooth < 0.0 || sigma_sq < 0.0 || g_bound < 0.0 || phi_tilde < 0.0)
    throw ParameterError("bound inputs must be >= 0");
  if (tau_c < 1.0) throw ParameterError("tau_c must be >= 1");
  const double lg = l_smooth * gamma;
  return 7.0 * f1 / (gamma * t_iters) +
         2600.0 * lg * lg * (tau_c - 1.0) * (tau_c - 1.0) * g_bound * g_bound +
         2600.0 * l_smooth * gamma * sigma_sq + 106000.0 * lg * lg * phi_tilde;
}

struct StepsizeParams {
  double l_smooth = 1.0;  // L
  double f_gap = 1.0;     // F0 (receiving-side rules) or F1 (assigning-side)
  double sigma_sq = 0.0;
  double zeta_sq = 0.0;
  double g_bound = 0.0;
  double t_iters = 1.0;
  double tau_max = 0.0;
  double tau_c = 1.0;
  double n = 1.0;
  double b = 1.0;
};

// Tuned constant stepsize per method: the minimum over the proposition's
// branches with all Theta-constants set to 1, intersected with the stated
// hard caps.  Branches whose driving constant is zero drop out.
inline double recommended_stepsize(StrategyKind method, const StepsizeParams& p) {
  if (!(p.l_smooth > 0.0) || !(p.t_iters > 0.0))
    throw ParameterError("stepsize rule needs L > 0 and T > 0");
  const double inf = std::numeric_limits<double>::infinity();
  const double L = p.l_smooth;
  auto safe_div = [&](double num, double den) { return den > 0.0 ? num / den : inf; };
  std::vector<double> cand;
  switch (method) {
    case StrategyKind::kPure:
      cand = {safe_div(1.0, 20.0 * L * std::sqrt(p.tau_max * p.tau_c)),
              1.0 / (6.0 * L),
              std::sqrt(safe_div(p.f_gap, L * p.sigma_sq * p.t_iters))};
      break;
    case StrategyKind::kPureWaiting:
      cand = {safe_div(std::sqrt(p.b), 20.0 * L * std::sqrt(p.tau_max * p.tau_c)),
              1.0 / (6.0 * L),
              std::sqrt(safe_div(p.f_gap * p.b, L * p.sigma_sq * p.t_iters))};
      break;
    case StrategyKind::kMinibatch:
      cand = {1.0 / (20.0 * L),
              std::sqrt(safe_div(p.f_gap * p.b, L * p.zeta_sq * p.t_iters))};
      break;
    case StrategyKind::kReshuffling:
      cand = {1.0 / (20.0 * L * p.n),
              std::cbrt(safe_div(p.f_gap, L * L * p.n * p.zeta_sq * p.t_iters))};
      break;
    case StrategyKind::kRandom:
      cand = {safe_div(1.0, 30.0 * L * p.tau_c),
              std::sqrt(safe_div(p.f_gap, L * p.sigma_sq * p.t_iters)),
              std::sqrt(safe_div(p.f_gap, L * p.zeta_sq * p.t_iters)),
              std::cbrt(safe_div(p.f_gap,
                                 L * L * p.tau_c * p.tau_c * p.g_bound * p.g_bound * p.t_iters))};
      break;
    case StrategyKind::kRandomWaiting:
      cand = {safe_div(p.b, 30.0 * L * std::max(p.b, p.tau_c)),
              std::sqrt(safe_div(p.f_gap * p.b, L * p.sigma_sq * p.t_iters)),
              std::sqrt(safe_div(p.f_gap * p.b, L * p.zeta_sq * p.t_iters)),
              std::cbrt(safe_div(p.f_gap * p.b * p.b,
                                 L * L * p.tau_c * p.tau_c * p.g_bound * p.g_bound * p.t_iters))};
      break;
    case StrategyKind::kShuffled:
      cand = {1.0 / (30.0 * L * p.n),
              std::cbrt(safe_div(p.f_gap, L * L * p.n * p.zeta_sq * p.t_iters)),
              std::cbrt(safe_div(p.f_gap, L * L * p.n * p.n * p.g_bound * p.g_bound *
                                              p.zeta_sq * p.t_iters))};
      break;
    default:
      throw ParameterError("no stepsize rule for this method");
  }
  double best = inf;
  for (double c : cand) best = std::min(best, c);
  if (!std::isfinite(best)) throw ParameterError("stepsize rule degenerates (all caps infinite)");
  return best;
}

// Correlation period used by the diagnostics when none is given.
inline std::int64_t default_correlation_period(double l_smooth, double gamma, std::int64_t T) {
  std::int64_t tau = 1;
  if (l_smooth > 0.0 && gamma > 0.0) {
    const double raw = std::floor(1.0 / (20.0 * l_smooth * gamma));
    if (raw >= 1.0) tau = raw > 1e18 ? static_cast<std::int64_t>(1e18) : static_cast<std::int64_t>(raw);
  }
  return std::clamp<std::int64_t>(tau, 1, std::max<std::int64_t>(T, 1));
}

// Evenly spaced snapshot probes (at most max_count, always including the
// endpoints) for the empirical constant estimates.
inline std::vector<ParamVector> trajectory_probes(const Trace& trace, int max_count = 32) {
  detail::require_finalized(trace);
  std::vector<ParamVector> probes;
  const auto stored = static_cast<std::int64_t>(trace.snapshots.size());
  if (stored == 0) {
    probes.push_back(trace.x_final);
    return probes;
  }
  const std::int64_t want = std::min<std::int64_t>(max_count, stored);
  for (std::int64_t k = 0; k < want; ++k) {
    const std::int64_t pick = want == 1 ? 0 : k * (stored - 1) / (want - 1);
    probes.push_back(trace.snapshots[static_cast<std::size_t>(pick)]);
  }
  probes.push_back(trace.x_final);
  return probes;
}

// Exact variance of the without-replacement mini-batch gradient estimator at
// the probe points (zero for full batches); empirical stand-in for the
// bounded-variance constant.
inline double estimate_sigma_sq(const Objective& obj, const std::vector<ParamVector>& probes,
                                std::int64_t batch_size) {
  if (probes.empty()) throw ParameterError("estimate_sigma_sq: no probe points");
  const std::int64_t m = obj.shard_size();
  if (batch_size <= 0 || batch_size >= m) return 0.0;
  // Var of the SRSWOR sample mean: pop_var * (m - k) / (k (m - 1)); the
  // deterministic penalty gradient adds nothing to the spread.
  const double factor = static_cast<double>(m - batch_size) /
                        (static_cast<double>(batch_size) * static_cast<double>(m - 1));
  double worst = 0.0;
  for (const auto& x : probes) {
    for (std::int64_t i = 0; i < obj.num_workers(); ++i) {
      std::vector<ParamVector> per_sample(static_cast<std::size_t>(m));
      ParamVector logistic_mean(x.size(), 0.0);
      for (std::int64_t j = 0; j < m; ++j) {
        const double* a = obj.data().row(i, j);
        const double b = obj.data().label(i, j);
        const double z = dot(a, x.data(), x.size());
        auto& g = per_sample[static_cast<std::size_t>(j)];
        g.assign(x.size(), 0.0);
        axpy(-b * sigmoid(-b * z), a, g.data(), g.size());
        axpy(1.0, g, logistic_mean);
      }
      for (double& v : logistic_mean) v /= static_cast<double>(m);
      double pop_var = 0.0;
      for (std::int64_t j = 0; j < m; ++j)
        pop_var += dist_sq(per_sample[static_cast<std::size_t>(j)], logistic_mean);
      pop_var /= static_cast<double>(m);
      worst = std::max(worst, pop_var * factor);
    }
  }
  return worst;
}

}  // namespace asgrad
