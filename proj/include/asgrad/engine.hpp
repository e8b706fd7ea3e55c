// Discrete-event core: an event queue of job completions drives the server
// update x_{t+1} = x_t - gamma_eff * g, the assigned/received job ledgers,
// and per-job gradient realization.
//
// Semantics pinned for reproducibility:
//  - Completion events are ordered by (time, worker, job id); the order is
//    total, so the heap pop sequence is deterministic.
//  - A job's stochastic gradient is realized when the job is assigned, at
//    the model the assignment names, and stays fixed while in flight.
//  - Workers are single-core and process queued jobs FIFO; a queued job's
//    duration is sampled when the worker picks it up.
//  - Per-step draw order: freed worker's next backlog job (timing stream),
//    then strategy assignments (strategy stream), then per new assignment a
//    gradient realization (gradient stream) followed by a duration draw if
//    the target worker is idle (timing stream).
#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "asgrad/errors.hpp"
#include "asgrad/linalg.hpp"
#include "asgrad/objective.hpp"
#include "asgrad/rng.hpp"
#include "asgrad/strategy.hpp"

namespace asgrad {

enum class TimingKind { kFixed, kPoisson, kNormal, kUniform };

// Per-worker compute-time law; s_i is seconds per gradient.
struct TimingModel {
  TimingKind kind = TimingKind::kFixed;
  std::vector<double> s;

  void validate(int n) const {
    if (static_cast<int>(s.size()) != n) throw ConfigError("timing: need one s_i per worker");
    for (double v : s) {
      if (!(v > 0.0)) throw ConfigError("timing: s_i must be > 0");
    }
  }
};

inline TimingKind parse_timing_kind(const std::string& text) {
  if (text == "fixed") return TimingKind::kFixed;
  if (text == "poisson") return TimingKind::kPoisson;
  if (text == "normal") return TimingKind::kNormal;
  if (text == "uniform") return TimingKind::kUniform;
  throw ConfigError("unknown timing kind '" + text + "'");
}

inline std::string to_string(TimingKind kind) {
  switch (kind) {
    case TimingKind::kFixed: return "fixed";
    case TimingKind::kPoisson: return "poisson";
    case TimingKind::kNormal: return "normal";
    case TimingKind::kUniform: return "uniform";
  }
  return "?";
}

// Default speed spread when the config names none: s_i = i + 1.
inline TimingModel default_timing(TimingKind kind, int n) {
  TimingModel tm;
  tm.kind = kind;
  tm.s.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) tm.s[static_cast<std::size_t>(i)] = static_cast<double>(i + 1);
  return tm;
}

constexpr double kMinDuration = 1e-6;  // keeps durations strictly positive

inline double sample_compute_time(const TimingModel& model, int worker, RandomStream& rng) {
  const double si = model.s[static_cast<std::size_t>(worker)];
  double r = si;
  switch (model.kind) {
    case TimingKind::kFixed: r = si; break;
    case TimingKind::kPoisson: r = static_cast<double>(rng.poisson(si)); break;
    case TimingKind::kNormal: r = std::abs(rng.normal(si, std::sqrt(si))) + 1.0; break;
    case TimingKind::kUniform: r = rng.u01() * si; break;
  }
  return r < kMinDuration ? kMinDuration : r;
}

// One ledger row per job, in assignment order (job_id == index).
// assign_step == -1 marks the initial assignment set; burst_pos is the
// position within the step's assignment list.  receive_step == -1 while the
// job is in flight.
struct JobRecord {
  int worker = 0;
  std::int64_t model_index = 0;
  std::int64_t assign_step = -1;
  std::int64_t receive_step = -1;
  int burst_pos = 0;
};

struct IterationRecord {
  std::int64_t t = 0;
  double sim_time = 0.0;
  int i_t = 0;
  std::int64_t pi_t = 0;
  std::int64_t tau_t = 0;
  std::vector<Assignment> assigned;  // assignments made during this step
  double grad_norm_sq = 0.0;         // ||grad f(x_t)||^2 (full objective)
  double loss = 0.0;                 // f(x_t)
};

struct RunConfig {
  StrategySpec strategy;
  double gamma = 1e-3;
  std::int64_t T = 1;
  std::int64_t batch_size = 0;  // 0 = full local gradients
  TimingModel timing;           // empty s -> default_timing(kind, n)
  TimingKind timing_kind = TimingKind::kFixed;
  std::uint64_t seed = 0;
  std::int64_t snapshot_cadence = 1;
  bool store_job_gradients = true;
  // Fill the per-iteration metrics in one batched pass (tiled GEMMs over the
  // retained iterate history) after the run instead of streaming the dataset
  // every step.  Same values up to summation order; costs d*(T+1) doubles of
  // working memory while the run is live.  The applied gradients are
  // unaffected.
  bool fast_metrics = false;
  double divergence_norm = 1e12;

  void validate() const {
    if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
    if (T < 0) throw ConfigError("T must be >= 0");
    if (snapshot_cadence < 1) throw ConfigError("snapshot cadence must be >= 1");
    if (batch_size < 0) throw ConfigError("batch size must be >= 0");
  }
};

struct Trace {
  // config echo
  StrategySpec strategy;
  double gamma = 0.0;
  double gamma_eff = 0.0;
  std::int64_t batch_size = 0;
  std::uint64_t seed = 0;
  std::int64_t T = 0;
  int n = 0;
  std::int64_t d = 0;

  std::vector<IterationRecord> records;
  std::vector<JobRecord> jobs;
  std::vector<ParamVector> job_gradients;  // empty vectors when not stored
  std::int64_t snapshot_cadence = 1;
  std::vector<ParamVector> snapshots;  // x_{k*cadence}
  ParamVector x0;
  ParamVector x_final;
  std::vector<std::uint64_t> unfinished;  // job ids still in flight at the end
  std::int64_t max_in_flight = 0;         // online concurrency maximum
  std::int64_t diverged_at = -1;          // step index, or -1
  bool finalized = false;

  bool has_snapshot(std::int64_t t) const {
    if (t == T) return true;
    return t >= 0 && t % snapshot_cadence == 0 &&
           t / snapshot_cadence < static_cast<std::int64_t>(snapshots.size());
  }
  const ParamVector& snapshot(std::int64_t t) const {
    if (t == T) return x_final;
    if (!has_snapshot(t))
      throw CadenceError("no snapshot at iteration " + std::to_string(t) +
                         " (cadence " + std::to_string(snapshot_cadence) + ")");
    return snapshots[static_cast<std::size_t>(t / snapshot_cadence)];
  }
  const ParamVector& job_gradient(std::uint64_t id) const {
    if (id >= job_gradients.size() || job_gradients[id].empty())
      throw IncompleteTraceError("job gradient not stored");
    return job_gradients[id];
  }
};

class Simulation {
 public:
  Simulation(const Objective& obj, const RunConfig& cfg)
      : obj_(obj),
        cfg_(cfg),
        rng_init_(cfg.seed, kStreamInit),
        rng_timing_(cfg.seed, kStreamTiming),
        rng_strategy_(cfg.seed, kStreamStrategy),
        rng_gradient_(cfg.seed, kStreamGradient) {
    cfg_.validate();
    const int n = static_cast<int>(obj.num_workers());
    if (cfg_.batch_size > obj.shard_size())
      throw ConfigError("batch size exceeds the shard size");
    timing_ = cfg_.timing;
    if (timing_.s.empty()) timing_ = default_timing(cfg_.timing_kind, n);
    timing_.validate(n);
    strategy_ = make_strategy(cfg_.strategy, n, rng_strategy_);
    gamma_eff_ = cfg_.gamma * strategy_->update_scale();
    // deferred metrics need the full iterate history until finalize()
    cadence_ = cfg_.fast_metrics ? 1 : cfg_.snapshot_cadence;

    trace_.strategy = cfg_.strategy;
    trace_.gamma = cfg_.gamma;
    trace_.gamma_eff = gamma_eff_;
    trace_.batch_size = cfg_.batch_size;
    trace_.seed = cfg_.seed;
    trace_.n = n;
    trace_.d = obj.dim();
    trace_.snapshot_cadence = cadence_;

    x_.resize(static_cast<std::size_t>(obj.dim()));
    for (auto& v : x_) v = rng_init_.normal();
    trace_.x0 = x_;
    trace_.snapshots.push_back(x_);

    workers_.resize(static_cast<std::size_t>(n));
    auto init = strategy_->initial_assignments(rng_strategy_);
    if (init.empty()) throw ConfigError("strategy produced no initial assignments");
    int pos = 0;
    for (const auto& a : init) {
      if (a.model_index != 0)
        throw ContractViolationError("initial assignment must target model 0");
      add_job(a, -1, pos++);
    }
    note_in_flight();
  }

  std::int64_t iterations_done() const { return t_; }
  bool diverged() const { return trace_.diverged_at >= 0; }
  const ParamVector& current_x() const { return x_; }
  std::int64_t in_flight() const {
    return static_cast<std::int64_t>(trace_.jobs.size()) - received_;
  }
  std::int64_t event_queue_size() const { return static_cast<std::int64_t>(queue_.size()); }

  IterationRecord step() {
    if (queue_.empty()) throw ContractViolationError("step: event queue is empty");
    const Pending ev = queue_.top();
    queue_.pop();
    if (ev.time < sim_time_) throw ContractViolationError("event time went backwards");
    sim_time_ = ev.time;
    const std::int64_t t = t_;
    JobRecord& job = trace_.jobs[ev.job_id];

    IterationRecord rec;
    rec.t = t;
    rec.sim_time = ev.time;
    rec.i_t = job.worker;
    rec.pi_t = job.model_index;
    rec.tau_t = t - job.model_index;
    if (!cfg_.fast_metrics) {
      const LossGrad metrics = obj_.value_and_grad(x_);
      rec.grad_norm_sq = norm_sq(metrics.grad);
      rec.loss = metrics.loss;
    }

    axpy(-gamma_eff_, trace_.job_gradients[ev.job_id], x_);

    job.receive_step = t;
    ++received_;
    if (!cfg_.store_job_gradients) ParamVector().swap(trace_.job_gradients[ev.job_id]);

    WorkerState& ws = workers_[static_cast<std::size_t>(job.worker)];
    ws.busy = false;
    if (!ws.backlog.empty()) {
      const std::uint64_t next_id = ws.backlog.front();
      ws.backlog.pop_front();
      start_job(job.worker, next_id);
    }

    t_ = t + 1;
    if (!all_finite(x_) || norm_sq(x_) > cfg_.divergence_norm * cfg_.divergence_norm) {
      trace_.diverged_at = t;
    }
    if (t_ % cadence_ == 0) trace_.snapshots.push_back(x_);

    if (!diverged()) {
      auto assigns = strategy_->on_receive(Job{job.worker, job.model_index, ev.job_id}, t,
                                           rng_strategy_);
      int pos = 0;
      for (const auto& a : assigns) {
        if (a.model_index > t + 1)
          throw ContractViolationError("strategy assigned a model from the future");
        add_job(a, t, pos++);
        rec.assigned.push_back(a);
      }
    }

    note_in_flight();
    trace_.records.push_back(rec);
    return trace_.records.back();
  }

  Trace finalize() {
    trace_.T = t_;
    trace_.x_final = x_;
    trace_.unfinished.clear();
    for (std::size_t id = 0; id < trace_.jobs.size(); ++id) {
      if (trace_.jobs[id].receive_step < 0)
        trace_.unfinished.push_back(static_cast<std::uint64_t>(id));
    }
    if (cfg_.fast_metrics) fill_deferred_metrics();
    trace_.finalized = true;
    return std::move(trace_);
  }

 private:
  struct Pending {
    double time;
    int worker;
    std::uint64_t job_id;
    bool operator>(const Pending& o) const {
      if (time != o.time) return time > o.time;
      if (worker != o.worker) return worker > o.worker;
      return job_id > o.job_id;
    }
  };

  struct WorkerState {
    bool busy = false;
    std::deque<std::uint64_t> backlog;
  };

  void add_job(const Assignment& a, std::int64_t assign_step, int burst_pos) {
    if (a.worker < 0 || a.worker >= trace_.n)
      throw ContractViolationError("assignment names an unknown worker");
    const auto id = static_cast<std::uint64_t>(trace_.jobs.size());
    trace_.jobs.push_back({a.worker, a.model_index, assign_step, -1, burst_pos});
    trace_.job_gradients.push_back(realize_gradient(a));
    WorkerState& ws = workers_[static_cast<std::size_t>(a.worker)];
    if (ws.busy) {
      ws.backlog.push_back(id);
    } else {
      start_job(a.worker, id);
    }
  }

  ParamVector realize_gradient(const Assignment& a) {
    const ParamVector& at = model_at(a.model_index);
    if (cfg_.batch_size == 0 || cfg_.batch_size == obj_.shard_size()) {
      return obj_.local_grad(at, a.worker);
    }
    return obj_.stochastic_grad(at, a.worker, cfg_.batch_size, rng_gradient_);
  }

  const ParamVector& model_at(std::int64_t index) {
    if (index == t_) return x_;  // the freshly updated model
    if (index > t_) throw ContractViolationError("model index from the future");
    if (index % cadence_ == 0 &&
        index / cadence_ < static_cast<std::int64_t>(trace_.snapshots.size())) {
      return trace_.snapshots[static_cast<std::size_t>(index / cadence_)];
    }
    throw CadenceError("assignment targets model " + std::to_string(index) +
                       " but no snapshot was kept");
  }

  // Computes every record's loss and gradient norm from the retained iterate
  // history in one batched pass, then thins the snapshot store back to the
  // requested cadence.
  void fill_deferred_metrics() {
    std::vector<double> losses, gnorms;
    obj_.batched_metrics(trace_.snapshots, losses, gnorms);
    for (std::size_t t = 0; t < trace_.records.size(); ++t) {
      trace_.records[t].loss = losses[t];
      trace_.records[t].grad_norm_sq = gnorms[t];
    }
    if (cfg_.snapshot_cadence != 1) {
      std::vector<ParamVector> thinned;
      for (std::int64_t idx = 0; idx * cfg_.snapshot_cadence <=
                                 static_cast<std::int64_t>(trace_.snapshots.size()) - 1;
           ++idx) {
        thinned.push_back(std::move(
            trace_.snapshots[static_cast<std::size_t>(idx * cfg_.snapshot_cadence)]));
      }
      trace_.snapshots = std::move(thinned);
      trace_.snapshot_cadence = cfg_.snapshot_cadence;
    }
  }

  void start_job(int worker, std::uint64_t job_id) {
    const double duration = sample_compute_time(timing_, worker, rng_timing_);
    queue_.push({sim_time_ + duration, worker, job_id});
    workers_[static_cast<std::size_t>(worker)].busy = true;
  }

  void note_in_flight() {
    trace_.max_in_flight = std::max(trace_.max_in_flight, in_flight());
  }

  const Objective& obj_;
  RunConfig cfg_;
  TimingModel timing_;
  RandomStream rng_init_, rng_timing_, rng_strategy_, rng_gradient_;
  std::unique_ptr<Strategy> strategy_;
  double gamma_eff_ = 0.0;
  std::int64_t cadence_ = 1;  // snapshot cadence while the run is live

  ParamVector x_;
  std::int64_t t_ = 0;
  std::int64_t received_ = 0;
  double sim_time_ = 0.0;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> queue_;
  std::vector<WorkerState> workers_;
  Trace trace_;
};

// Runs T iterations (fewer if the iterates diverge) and returns the trace,
// including the set of jobs still in flight at termination.
inline Trace run(const Objective& obj, const RunConfig& cfg) {
  Simulation sim(obj, cfg);
  for (std::int64_t t = 0; t < cfg.T && !sim.diverged(); ++t) sim.step();
  return sim.finalize();
}

}  // namespace asgrad
