#include "asgrad/diagnostics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "asgrad/dataset.hpp"
#include "asgrad/engine.hpp"
#include "asgrad/objective.hpp"
#include "asgrad/rng.hpp"

using namespace asgrad;

namespace {

Dataset small_dataset(int n, int m, int d, std::uint64_t seed) {
  return generate_synthetic({1.0, 1.0, n, m, d, seed});
}

Dataset homogeneous_dataset(int n, std::uint64_t seed) {
  const Dataset shard = generate_synthetic({0.5, 0.5, 1, 8, 4, seed});
  Dataset ds;
  ds.n = n;
  ds.m = shard.m;
  ds.d = shard.d;
  for (int i = 0; i < n; ++i) {
    ds.features.insert(ds.features.end(), shard.features.begin(), shard.features.end());
    ds.labels.insert(ds.labels.end(), shard.labels.begin(), shard.labels.end());
  }
  return ds;
}

RunConfig base_config(const std::string& strategy, double gamma, std::int64_t T,
                      std::uint64_t seed) {
  RunConfig cfg;
  cfg.strategy = parse_strategy_spec(strategy);
  cfg.gamma = gamma;
  cfg.T = T;
  cfg.seed = seed;
  cfg.timing_kind = TimingKind::kFixed;
  return cfg;
}

// Builds a ledger-only trace (no parameters/gradients) from a job table.
Trace trace_from_jobs(std::vector<JobRecord> jobs, std::int64_t T, int n) {
  Trace trace;
  trace.T = T;
  trace.n = n;
  trace.jobs = std::move(jobs);
  std::vector<const JobRecord*> by_receipt(static_cast<std::size_t>(T), nullptr);
  for (std::size_t id = 0; id < trace.jobs.size(); ++id) {
    const auto& job = trace.jobs[id];
    if (job.receive_step >= 0) by_receipt[static_cast<std::size_t>(job.receive_step)] = &job;
    else trace.unfinished.push_back(static_cast<std::uint64_t>(id));
  }
  for (std::int64_t t = 0; t < T; ++t) {
    const JobRecord* job = by_receipt[static_cast<std::size_t>(t)];
    IterationRecord rec;
    rec.t = t;
    rec.i_t = job->worker;
    rec.pi_t = job->model_index;
    rec.tau_t = t - job->model_index;
    trace.records.push_back(rec);
  }
  trace.finalized = true;
  return trace;
}

// Direct evaluation of the delay definitions from the raw job table,
// independent of the diagnostics implementation.
void oracle_delays(const std::vector<JobRecord>& jobs, std::int64_t T, double* avg,
                   std::int64_t* mx, std::int64_t* tau_c) {
  double sum = 0.0;
  std::int64_t m = 0;
  for (const auto& job : jobs) {
    const std::int64_t v =
        job.receive_step >= 0 ? job.receive_step - job.model_index : T - job.model_index;
    sum += static_cast<double>(v);
    m = std::max(m, v);
  }
  *avg = sum / static_cast<double>(jobs.size());
  *mx = m;
  std::int64_t best = 0;
  for (std::int64_t v = 0; v <= T; ++v) {
    std::int64_t flight = 0;
    for (const auto& job : jobs) {
      const bool assigned = job.assign_step < 0 || job.assign_step <= v - 1;
      const bool received = job.receive_step >= 0 && job.receive_step <= v - 1;
      if (assigned && !received) ++flight;
    }
    best = std::max(best, flight);
  }
  *tau_c = best;
}

}  // namespace

TEST(Diagnostics, HandLedgerFixture) {
  std::vector<JobRecord> jobs = {
      {0, 0, -1, 0, 0},  // initial, received at t=0 (tau 0)
      {1, 0, -1, 1, 1},  // initial, received at t=1 (tau 1)
      {1, 1, 0, 3, 0},   // assigned at step 0, received at t=3 (tau 2)
      {0, 2, 1, 2, 0},   // assigned at step 1, received at t=2 (tau 0)
      {0, 3, 2, -1, 0},  // assigned at step 2, never finished
  };
  const Trace trace = trace_from_jobs(std::move(jobs), 4, 2);
  const DelayStats ds = delay_stats(trace);
  EXPECT_DOUBLE_EQ(ds.tau_avg, 0.8);
  EXPECT_EQ(ds.tau_max, 2);
  EXPECT_EQ(ds.tau_c, 2);
}

TEST(Diagnostics, RandomizedLedgersMatchOracle) {
  RandomStream rng(77, kStreamStrategy);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(4));
    const std::int64_t T = 5 + static_cast<std::int64_t>(rng.below(26));
    std::vector<JobRecord> jobs;
    const int k0 = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < k0; ++i)
      jobs.push_back({static_cast<int>(rng.below(n)), 0, -1, -1, i});
    std::vector<std::size_t> in_flight(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) in_flight[i] = i;
    for (std::int64_t t = 0; t < T; ++t) {
      // receive one random eligible in-flight job
      const std::size_t pick = rng.below(in_flight.size());
      jobs[in_flight[pick]].receive_step = t;
      in_flight.erase(in_flight.begin() + static_cast<std::ptrdiff_t>(pick));
      // assign 0..2 new jobs, at least one if the pipeline drained
      std::uint64_t extra = rng.below(3);
      if (in_flight.empty() && extra == 0) extra = 1;
      for (std::uint64_t a = 0; a < extra; ++a) {
        const std::int64_t lo = std::max<std::int64_t>(0, t + 1 - 5);
        const std::int64_t alpha = lo + static_cast<std::int64_t>(rng.below(
                                            static_cast<std::uint64_t>(t + 2 - lo)));
        jobs.push_back({static_cast<int>(rng.below(n)), alpha, t, -1, static_cast<int>(a)});
        in_flight.push_back(jobs.size() - 1);
      }
    }
    double want_avg;
    std::int64_t want_max, want_tau_c;
    oracle_delays(jobs, T, &want_avg, &want_max, &want_tau_c);
    const Trace trace = trace_from_jobs(jobs, T, n);
    const DelayStats ds = delay_stats(trace);
    EXPECT_EQ(ds.tau_avg, want_avg) << "rep " << rep;
    EXPECT_EQ(ds.tau_max, want_max) << "rep " << rep;
    EXPECT_EQ(ds.tau_c, want_tau_c) << "rep " << rep;
    EXPECT_LE(ds.tau_avg, static_cast<double>(ds.tau_max));
  }
}

TEST(Diagnostics, SequentialLedgerHasZeroDelays) {
  const Dataset data = small_dataset(1, 4, 3, 2);
  const Objective obj(data, 0.1);
  const Trace trace = run(obj, base_config("pure", 1e-3, 20, 3));
  const DelayStats ds = delay_stats(trace);
  EXPECT_EQ(ds.tau_avg, 0.0);
  EXPECT_EQ(ds.tau_max, 0);
  EXPECT_EQ(ds.tau_c, 1);
}

TEST(Diagnostics, PureAsyncConcurrencyIsWorkerCount) {
  const Dataset data = small_dataset(6, 4, 3, 2);
  const Objective obj(data, 0.1);
  const Trace trace = run(obj, base_config("pure", 1e-3, 40, 3));
  const DelayStats ds = delay_stats(trace);
  EXPECT_EQ(ds.tau_c, 6);
  EXPECT_EQ(ds.tau_c, trace.max_in_flight);
}

TEST(Diagnostics, ConcurrencyMatchesEngineAcrossStrategies) {
  const Dataset data = small_dataset(5, 4, 3, 4);
  const Objective obj(data, 0.1);
  for (const char* spec : {"pure", "pure-wait:b=2", "random", "random-wait:b=3",
                           "shuffled:mode=cycle"}) {
    RunConfig cfg = base_config(spec, 1e-3, 60, 9);
    cfg.timing_kind = TimingKind::kPoisson;
    const Trace trace = run(obj, cfg);
    EXPECT_EQ(delay_stats(trace).tau_c, trace.max_in_flight) << spec;
  }
}

TEST(Diagnostics, AssignedDelaysZeroForImmediateStrategies) {
  const Dataset data = small_dataset(4, 4, 3, 4);
  const Objective obj(data, 0.1);
  for (const char* spec : {"pure", "random", "shuffled:mode=cycle"}) {
    const Trace trace = run(obj, base_config(spec, 1e-3, 30, 9));
    const DelayStats ds = delay_stats(trace);
    // consumed assignments carry no assigned delay; only the tail jobs
    // assigned in the last step contribute T - alpha = 0.
    EXPECT_EQ(ds.tilde_tau_avg, 0.0) << spec;
    EXPECT_EQ(ds.tilde_tau_max, 0) << spec;
  }
  const Trace wait = run(obj, base_config("pure-wait:b=4", 1e-3, 40, 9));
  const DelayStats wds = delay_stats(wait);
  EXPECT_EQ(wds.tilde_tau_max, 3);  // spread burst: delays 0..b-1
}

TEST(Diagnostics, DelayStatsRequireFinalizedTrace) {
  Trace trace;
  EXPECT_THROW(delay_stats(trace), IncompleteTraceError);
}

TEST(Diagnostics, HomogeneousShardsGiveZeroCorrelationAndDelayVariance) {
  const Dataset data = homogeneous_dataset(4, 5);
  const Objective obj(data, 0.1);
  RunConfig cfg = base_config("random", 5e-3, 60, 2);
  cfg.timing_kind = TimingKind::kPoisson;
  const Trace trace = run(obj, cfg);
  const CorrelationReport rep = sequence_correlation(trace, 8, Process::kReceived, obj);
  for (double s : rep.sigma_sq_per_chunk) EXPECT_LE(s, 1e-10);
  EXPECT_LE(rep.nu_sq, 1e-10);
  EXPECT_LE(delay_variance(trace, Process::kAssigned, obj), 1e-10);
}

TEST(Diagnostics, CorrelationMatchesDirectFormulaOnToyRun) {
  const Dataset data = small_dataset(2, 5, 3, 6);
  const Objective obj(data, 0.1);
  RunConfig cfg = base_config("pure", 2e-3, 10, 7);
  cfg.timing.kind = TimingKind::kFixed;
  cfg.timing.s = {1.0, 2.0};
  const Trace trace = run(obj, cfg);
  const std::int64_t tau = 2;
  const CorrelationReport rep = sequence_correlation(trace, tau, Process::kReceived, obj);
  ASSERT_EQ(rep.sigma_sq_per_chunk.size(), 5u);

  for (std::int64_t k = 0; k < 5; ++k) {
    double want = 0.0;
    const ParamVector& x = trace.snapshot(k * tau);
    const ParamVector mean = obj.global_grad(x);
    ParamVector acc(x.size(), 0.0);
    for (std::int64_t j = 0; j < tau && k * tau + j < trace.T; ++j) {
      const ParamVector gi = obj.local_grad(x, trace.records[k * tau + j].i_t);
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += gi[c] - mean[c];
      want = std::max(want, norm_sq(acc));
    }
    EXPECT_NEAR(rep.sigma_sq_per_chunk[static_cast<std::size_t>(k)], want,
                1e-13 * (1.0 + want))
        << "chunk " << k;
  }
}

TEST(Diagnostics, ShuffledAssignedFullCycleSumsVanish) {
  const Dataset data = small_dataset(4, 5, 3, 8);
  const Objective obj(data, 0.1);
  RunConfig cfg = base_config("shuffled:mode=cycle", 2e-3, 24, 3);
  cfg.timing_kind = TimingKind::kPoisson;
  const Trace trace = run(obj, cfg);
  const auto sums = correlation_partial_sums(trace, 4, Process::kAssigned, obj);
  for (std::size_t k = 0; k < sums.size(); ++k) {
    if (sums[k].size() == 4) {
      EXPECT_LE(sums[k][3], 1e-10) << "chunk " << k;
      EXPECT_GT(sums[k][0], 0.0);
    }
  }
}

TEST(Diagnostics, DelayVarianceZeroWithoutDelays) {
  const Dataset data = small_dataset(3, 4, 3, 9);
  const Objective obj(data, 0.1);
  const Dataset pts = flatten_to_points(data, 6);
  const Objective pobj(pts, 0.1);
  const Trace rr = run(pobj, base_config("rr:mode=epoch", 1e-3, 18, 4));
  EXPECT_EQ(delay_variance(rr, Process::kReceived, pobj), 0.0);
  EXPECT_EQ(delay_variance(rr, Process::kAssigned, pobj), 0.0);
}

TEST(Diagnostics, DelayVarianceMatchesHandExpansion) {
  const Dataset data = small_dataset(2, 4, 3, 10);
  const Objective obj(data, 0.1);
  RunConfig cfg = base_config("pure", 2e-3, 6, 11);
  cfg.timing.kind = TimingKind::kFixed;
  cfg.timing.s = {1.0, 2.0};
  const Trace trace = run(obj, cfg);
  double want = 0.0;
  for (std::int64_t t = 0; t < trace.T; ++t) {
    ParamVector acc(static_cast<std::size_t>(trace.d), 0.0);
    for (std::int64_t j = trace.records[t].pi_t; j < t; ++j) {
      const auto& rec = trace.records[j];
      const ParamVector gi = obj.local_grad(trace.snapshot(rec.pi_t), rec.i_t);
      const ParamVector gm = obj.global_grad(trace.snapshot(rec.pi_t));
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += gi[c] - gm[c];
    }
    want += norm_sq(acc);
  }
  const double got = delay_variance(trace, Process::kReceived, obj);
  EXPECT_NEAR(got, want, 1e-12 * (1.0 + want));
  EXPECT_GT(got, 0.0);
}

TEST(Diagnostics, VirtualIteratesRestartEveryStepTracksExactly) {
  const Dataset data = small_dataset(3, 4, 3, 12);
  const Objective obj(data, 0.1);
  const Trace trace = run(obj, base_config("random", 3e-3, 20, 5));
  const VirtualIterates vi = virtual_iterates(trace, 1, obj);
  EXPECT_EQ(vi.max_gap, 0.0);
  ASSERT_EQ(vi.sequence.size(), 21u);
}

TEST(Diagnostics, VirtualIteratesSingleWorkerFullGradientGapZero) {
  const Dataset data = small_dataset(1, 5, 3, 13);
  const Objective obj(data, 0.1);
  const Trace trace = run(obj, base_config("pure", 3e-3, 15, 6));
  const VirtualIterates vi = virtual_iterates(trace, 5, obj);
  EXPECT_EQ(vi.max_gap, 0.0);
}

TEST(Diagnostics, VirtualIterateGapMatchesStoredJobGradients) {
  const Dataset data = small_dataset(3, 4, 3, 14);
  const Objective obj(data, 0.1);
  RunConfig cfg = base_config("pure", 4e-3, 12, 8);
  cfg.timing_kind = TimingKind::kUniform;
  const Trace trace = run(obj, cfg);
  const std::int64_t tau = 4;
  const VirtualIterates vi = virtual_iterates(trace, tau, obj);
  for (std::int64_t t = 0; t <= trace.T; ++t) {
    const std::int64_t restart = (t / tau) * tau;
    ParamVector acc(static_cast<std::size_t>(trace.d), 0.0);
    for (std::int64_t j = restart; j < t; ++j) {
      const ParamVector gm = obj.global_grad(trace.snapshot(j));
      // the gradient applied at step j
      for (std::size_t id = 0; id < trace.jobs.size(); ++id) {
        if (trace.jobs[id].receive_step == j) {
          const ParamVector& gj = trace.job_gradient(static_cast<std::uint64_t>(id));
          for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += gm[c] - gj[c];
          break;
        }
      }
    }
    const double want = trace.gamma_eff * norm(acc);
    const double got = dist(trace.snapshot(t), vi.sequence[static_cast<std::size_t>(t)]);
    EXPECT_NEAR(got, want, 1e-10 * (1.0 + want)) << "t=" << t;
  }
}

TEST(Diagnostics, LemmaResidualTinyAcrossStrategies) {
  const Dataset data = small_dataset(4, 5, 3, 15);
  const Objective obj(data, 0.1);
  double max_norm = 0.0;
  for (const char* spec :
       {"pure", "pure-wait:b=2", "random", "random-wait:b=2", "shuffled:mode=cycle"}) {
    RunConfig cfg = base_config(spec, 3e-3, 80, 10);
    cfg.timing_kind = TimingKind::kPoisson;
    cfg.batch_size = 2;
    const Trace trace = run(obj, cfg);
    for (const auto& snap : trace.snapshots) max_norm = std::max(max_norm, norm(snap));
    const AssignedVirtualIterates avi = assigned_virtual_iterates(trace, obj);
    EXPECT_LE(avi.lemma_max_residual, 1e-9 * (1.0 + max_norm)) << spec;
  }
}

TEST(Diagnostics, SequentialInFlightGapIsSingleGradient) {
  const Dataset data = small_dataset(2, 3, 3, 16);
  const Objective obj(data, 0.1);
  const Dataset pts = flatten_to_points(data, 5);
  const Objective pobj(pts, 0.1);
  const Trace trace = run(pobj, base_config("rr:mode=epoch", 2e-3, 15, 12));
  const AssignedVirtualIterates avi = assigned_virtual_iterates(trace, pobj);
  for (std::int64_t t = 0; t <= trace.T; ++t) {
    const double gap = dist(trace.snapshot(t), avi.sequence[static_cast<std::size_t>(t)]);
    // exactly one job in flight: gap is gamma * ||g|| for that job (or 0)
    double want = 0.0;
    for (std::size_t id = 0; id < trace.jobs.size(); ++id) {
      const auto& job = trace.jobs[id];
      const bool in_a = job.assign_step < 0 ? t >= 1 : job.assign_step <= t - 2;
      const bool in_r = job.receive_step >= 0 && job.receive_step <= t - 1;
      if (in_a && !in_r) want += trace.gamma_eff * norm(trace.job_gradient(id));
    }
    EXPECT_NEAR(gap, want, 1e-12 * (1.0 + want)) << "t=" << t;
  }
}

TEST(Diagnostics, AssignedIteratesHandUnrolled) {
  const Dataset data = small_dataset(2, 4, 3, 17);
  const Objective obj(data, 0.1);
  RunConfig cfg = base_config("pure", 2e-3, 8, 13);
  cfg.timing.kind = TimingKind::kFixed;
  cfg.timing.s = {1.0, 2.0};
  const Trace trace = run(obj, cfg);
  const AssignedVirtualIterates avi = assigned_virtual_iterates(trace, obj);
  // y3 = x0 - gamma (g0 + g1) - gamma g(step0) - gamma g(step1)
  ParamVector want = trace.x0;
  axpy(-trace.gamma_eff, trace.job_gradient(0), want);
  axpy(-trace.gamma_eff, trace.job_gradient(1), want);
  for (std::size_t id = 0; id < trace.jobs.size(); ++id) {
    if (trace.jobs[id].assign_step == 0 || trace.jobs[id].assign_step == 1)
      axpy(-trace.gamma_eff, trace.job_gradient(id), want);
  }
  ASSERT_GE(avi.sequence.size(), 4u);
  for (std::size_t c = 0; c < want.size(); ++c) EXPECT_EQ(avi.sequence[3][c], want[c]);
}

TEST(Diagnostics, BoundEvaluatorsArithmetic) {
  EXPECT_EQ(theorem3_bound(0.0, 1.0, 1e-3, 1e4, 0.0, 0.0), 0.0);
  EXPECT_NEAR(theorem3_bound(1.0, 1.0, 1e-3, 1e4, 1.0, 10.0), 0.875, 1e-15);
  const double b1 = theorem3_bound(1.0, 2.0, 1e-3, 1000.0, 3.0, 5.0);
  const double b2 = theorem3_bound(1.0, 2.0, 1e-3, 2000.0, 3.0, 5.0);
  EXPECT_NEAR(b1 - b2, 5.0 / (1e-3 * 1000.0) - 5.0 / (1e-3 * 2000.0), 1e-12);

  EXPECT_EQ(theorem4_bound(0.0, 1.0, 1e-3, 10.0, 0.0, 1.0, 5.0, 0.0), 0.0);
  EXPECT_EQ(theorem4_bound(1.0, 1.0, 1e-3, 10.0, 0.5, 1.0, 1e9, 2.0),
            theorem4_bound(1.0, 1.0, 1e-3, 10.0, 0.5, 1.0, 0.0, 2.0));
  EXPECT_NEAR(theorem4_bound(2.0, 0.5, 0.01, 1000.0, 3.0, 4.0, 2.0, 7.0),
              1.4 + 2.34 + 39.0 + 18.55, 1e-12);
  EXPECT_THROW(theorem4_bound(1.0, 1.0, 1e-3, 10.0, 0.0, 0.5, 1.0, 0.0), ParameterError);
  EXPECT_THROW(theorem3_bound(1.0, 1.0, 0.0, 10.0, 0.0, 0.0), ParameterError);
}

TEST(Diagnostics, BoundMonotonicity) {
  RandomStream rng(19, kStreamInit);
  for (int rep = 0; rep < 100; ++rep) {
    const double f = std::abs(rng.normal()) + 0.1;
    const double l = std::abs(rng.normal()) + 0.1;
    const double g = 1e-4 * (1.0 + rng.u01());
    const double t = 100.0 * (1.0 + rng.u01());
    const double s = std::abs(rng.normal());
    const double phi = std::abs(rng.normal());
    const double tc = 1.0 + rng.below(8);
    const double gb = std::abs(rng.normal());
    const double bump = 0.5 + rng.u01();
    EXPECT_GE(theorem3_bound(f, l, g, t, s + bump, phi), theorem3_bound(f, l, g, t, s, phi));
    EXPECT_GE(theorem3_bound(f, l, g, t, s, phi + bump), theorem3_bound(f, l, g, t, s, phi));
    EXPECT_GE(theorem3_bound(f + bump, l, g, t, s, phi), theorem3_bound(f, l, g, t, s, phi));
    EXPECT_LE(theorem3_bound(f, l, g, t + bump, s, phi), theorem3_bound(f, l, g, t, s, phi));
    EXPECT_GE(theorem4_bound(f, l, g, t, s, tc, gb + bump, phi),
              theorem4_bound(f, l, g, t, s, tc, gb, phi));
    EXPECT_GE(theorem4_bound(f, l, g, t, s, tc, gb, phi + bump),
              theorem4_bound(f, l, g, t, s, tc, gb, phi));
    EXPECT_GE(theorem4_bound(f + bump, l, g, t, s, tc, gb, phi),
              theorem4_bound(f, l, g, t, s, tc, gb, phi));
    EXPECT_LE(theorem4_bound(f, l, g, t + bump, s, tc, gb, phi),
              theorem4_bound(f, l, g, t, s, tc, gb, phi));
  }
}

TEST(Diagnostics, RecommendedStepsizeFormulas) {
  StepsizeParams p;
  p.l_smooth = 2.0;
  p.f_gap = 1.5;
  p.sigma_sq = 0.8;
  p.zeta_sq = 0.6;
  p.g_bound = 1.2;
  p.t_iters = 5000.0;
  p.tau_max = 9.0;
  p.tau_c = 4.0;
  p.n = 10.0;
  p.b = 3.0;

  const double pure = recommended_stepsize(StrategyKind::kPure, p);
  EXPECT_NEAR(pure, std::min(1.0 / (20.0 * 2.0 * std::sqrt(9.0 * 4.0)),
                             std::sqrt(1.5 / (2.0 * 0.8 * 5000.0))),
              1e-18);

  const double shuffled = recommended_stepsize(StrategyKind::kShuffled, p);
  const double want_shuffled =
      std::min({1.0 / (30.0 * 2.0 * 10.0),
                std::cbrt(1.5 / (4.0 * 10.0 * 0.6 * 5000.0)),
                std::cbrt(1.5 / (4.0 * 100.0 * 1.44 * 0.6 * 5000.0))});
  EXPECT_NEAR(shuffled, want_shuffled, 1e-18);

  // larger horizons push the tuned stepsize toward zero
  StepsizeParams big = p;
  big.t_iters = 5e14;
  EXPECT_LT(recommended_stepsize(StrategyKind::kPure, big), 1e-4 * pure);

  // every built-in method has a rule
  for (auto kind : {StrategyKind::kPure, StrategyKind::kPureWaiting, StrategyKind::kRandom,
                    StrategyKind::kRandomWaiting, StrategyKind::kShuffled,
                    StrategyKind::kMinibatch, StrategyKind::kReshuffling}) {
    const double g = recommended_stepsize(kind, p);
    EXPECT_GT(g, 0.0);
    EXPECT_TRUE(std::isfinite(g));
  }
  EXPECT_THROW(recommended_stepsize(StrategyKind::kPure, StepsizeParams{0.0}), ParameterError);
}

TEST(Diagnostics, PermutationZeroSumProperty) {
  const Dataset data = small_dataset(6, 5, 4, 20);
  const Objective obj(data, 0.1);
  RandomStream rng(3, kStreamInit);
  for (int rep = 0; rep < 10; ++rep) {
    ParamVector x(static_cast<std::size_t>(data.d));
    for (auto& v : x) v = rng.normal();
    const ParamVector mean = obj.global_grad(x);
    ParamVector acc(x.size(), 0.0);
    double scale = 0.0;
    for (std::int64_t i = 0; i < data.n; ++i) {
      const ParamVector gi = obj.local_grad(x, i);
      scale += norm(gi);
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += gi[c] - mean[c];
    }
    EXPECT_LE(norm(acc), 1e-10 * scale);
  }
}

TEST(Diagnostics, DefaultCorrelationPeriod) {
  EXPECT_EQ(default_correlation_period(1.0, 1e-3, 1000), 50);
  EXPECT_EQ(default_correlation_period(1.0, 1e-3, 10), 10);   // clamped to T
  EXPECT_EQ(default_correlation_period(1.0, 10.0, 1000), 1);  // floor hits zero
  EXPECT_EQ(default_correlation_period(0.0, 1e-3, 1000), 1);
}

TEST(Diagnostics, SigmaSqEstimate) {
  const Dataset data = small_dataset(2, 6, 3, 21);
  const Objective obj(data, 0.1);
  RandomStream rng(9, kStreamInit);
  ParamVector x(static_cast<std::size_t>(data.d));
  for (auto& v : x) v = rng.normal();
  EXPECT_EQ(estimate_sigma_sq(obj, {x}, 0), 0.0);
  EXPECT_EQ(estimate_sigma_sq(obj, {x}, data.m), 0.0);
  const double v1 = estimate_sigma_sq(obj, {x}, 1);
  const double v3 = estimate_sigma_sq(obj, {x}, 3);
  EXPECT_GT(v1, 0.0);
  EXPECT_GT(v1, v3);  // larger batches shrink the estimator variance
}

TEST(Diagnostics, MultiTraceAveraging) {
  const Dataset data = small_dataset(3, 4, 3, 22);
  const Objective obj(data, 0.1);
  RunConfig cfg = base_config("random", 2e-3, 16, 0);
  cfg.timing_kind = TimingKind::kPoisson;
  std::vector<Trace> traces;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    cfg.seed = seed;
    traces.push_back(run(obj, cfg));
  }
  const CorrelationReport rep = sequence_correlation(traces, 4, Process::kReceived, obj);
  EXPECT_EQ(rep.num_runs, 3);
  ASSERT_EQ(rep.sigma_sq_per_chunk.size(), 4u);
  double nu_mean = 0.0;
  for (const auto& t : traces) nu_mean += delay_variance(t, Process::kReceived, obj);
  nu_mean /= 3.0;
  EXPECT_NEAR(rep.nu_sq, nu_mean, 1e-12 * (1.0 + nu_mean));
}
