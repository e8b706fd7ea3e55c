#include "asgrad/objective.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "asgrad/dataset.hpp"
#include "asgrad/rng.hpp"

using namespace asgrad;

namespace {

Dataset tiny_dataset() {
  // 2 workers, 2 samples each, d = 3, hand-set values
  Dataset ds;
  ds.n = 2;
  ds.m = 2;
  ds.d = 3;
  ds.features = {0.5, -1.0, 2.0,  1.5, 0.25, -0.75,
                 -2.0, 1.0, 0.0,  0.3, -0.6, 0.9};
  ds.labels = {1, -1, -1, 1};
  return ds;
}

Dataset homogeneous_dataset(int n) {
  const SynConfig cfg{0.5, 0.5, 1, 6, 4, 3};
  const Dataset shard = generate_synthetic(cfg);
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

ParamVector random_point(std::uint64_t seed, std::int64_t d, double scale = 1.0) {
  RandomStream rng(seed, kStreamInit);
  ParamVector x(d);
  for (auto& v : x) v = scale * rng.normal();
  return x;
}

// Central finite differences of local_loss.
ParamVector fd_gradient(const Objective& obj, const ParamVector& x, std::int64_t worker,
                        double h = 1e-5) {
  ParamVector g(x.size());
  ParamVector xp = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = xp[k];
    xp[k] = orig + h;
    const double fp = obj.local_loss(xp, worker);
    xp[k] = orig - h;
    const double fm = obj.local_loss(xp, worker);
    xp[k] = orig;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST(Objective, LossAtZeroIsLogTwo) {
  const Dataset ds = tiny_dataset();
  const Objective obj(ds, 0.3);
  const ParamVector zero(3, 0.0);
  EXPECT_NEAR(obj.local_loss(zero, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(obj.local_loss(zero, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(obj.global_loss(zero), std::log(2.0), 1e-15);
}

TEST(Objective, SingleSampleMarginLoss) {
  Dataset ds;
  ds.n = 1;
  ds.m = 1;
  ds.d = 2;
  ds.features = {1.0, 0.0};
  ds.labels = {1};
  const Objective obj(ds, 0.0);
  for (double t : {-30.0, -2.0, 0.0, 1.5, 40.0, 800.0}) {
    const ParamVector x{t, 0.0};
    EXPECT_NEAR(obj.local_loss(x, 0), log1p_exp(-t), 1e-14 * (1.0 + std::abs(t)));
    EXPECT_TRUE(std::isfinite(obj.local_loss(x, 0)));
  }
}

TEST(Objective, SynLossMatchesExtendedPrecisionReference) {
  const SynConfig cfg{0.5, 0.5, 3, 8, 5, 42};
  const Dataset ds = generate_synthetic(cfg);
  const Objective obj(ds, 0.1);
  const ParamVector zero(5, 0.0);
  // independent scalar-by-scalar reference in long double
  long double acc = 0.0L;
  for (std::int64_t j = 0; j < ds.m; ++j) {
    long double z = 0.0L;
    for (std::int64_t k = 0; k < ds.d; ++k)
      z += static_cast<long double>(ds.row(0, j)[k]) * 0.0L;
    acc += std::log(1.0L + std::exp(-static_cast<long double>(ds.label(0, j)) * z));
  }
  acc /= static_cast<long double>(ds.m);
  EXPECT_NEAR(obj.local_loss(zero, 0), static_cast<double>(acc), 1e-14);

  // and at a nonzero point
  const ParamVector x = random_point(5, 5);
  long double acc2 = 0.0L;
  for (std::int64_t j = 0; j < ds.m; ++j) {
    long double z = 0.0L;
    for (std::int64_t k = 0; k < ds.d; ++k)
      z += static_cast<long double>(ds.row(0, j)[k]) * static_cast<long double>(x[k]);
    acc2 += std::log(1.0L + std::exp(-static_cast<long double>(ds.label(0, j)) * z));
  }
  acc2 /= static_cast<long double>(ds.m);
  long double reg = 0.0L;
  for (double xk : x) {
    const long double q = static_cast<long double>(xk) * xk;
    reg += q / (1.0L + q);
  }
  acc2 += 0.1L * reg;
  EXPECT_NEAR(obj.local_loss(x, 0), static_cast<double>(acc2),
              1e-13 * (1.0 + std::abs(static_cast<double>(acc2))));
}

TEST(Objective, GradientAtZero) {
  const Dataset ds = tiny_dataset();
  const Objective obj(ds, 0.7);
  const ParamVector zero(3, 0.0);
  for (std::int64_t i = 0; i < 2; ++i) {
    const ParamVector g = obj.local_grad(zero, i);
    for (std::int64_t k = 0; k < 3; ++k) {
      double want = 0.0;
      for (std::int64_t j = 0; j < ds.m; ++j) want -= ds.label(i, j) * ds.row(i, j)[k];
      want /= 2.0 * static_cast<double>(ds.m);
      EXPECT_NEAR(g[k], want, 1e-15);
    }
  }
}

TEST(Objective, PenaltyGradientComponent) {
  // zero features isolate the penalty: at x_k = 1 the component is lambda/2
  Dataset ds;
  ds.n = 1;
  ds.m = 1;
  ds.d = 2;
  ds.features = {0.0, 0.0};
  ds.labels = {1};
  const double lambda = 0.34;
  const Objective obj(ds, lambda);
  const ParamVector x{1.0, 0.0};
  const ParamVector g = obj.local_grad(x, 0);
  EXPECT_NEAR(g[0], lambda / 2.0, 1e-15);
  EXPECT_EQ(g[1], 0.0);
}

TEST(Objective, PenaltyGradientIsOdd) {
  RandomStream rng(21, kStreamInit);
  for (int rep = 0; rep < 100; ++rep) {
    const double xk = 5.0 * rng.normal();
    EXPECT_EQ(Objective::penalty_grad_coord(-xk), -Objective::penalty_grad_coord(xk));
  }
}

TEST(Objective, FiniteDifferenceAgreement) {
  const SynConfig cfg{1.0, 1.0, 4, 10, 6, 11};
  const Dataset ds = generate_synthetic(cfg);
  const Objective obj(ds, 0.1);
  for (std::uint64_t rep = 0; rep < 25; ++rep) {
    const ParamVector x = random_point(100 + rep, ds.d, 1.5);
    const auto worker = static_cast<std::int64_t>(rep % ds.n);
    const ParamVector g = obj.local_grad(x, worker);
    const ParamVector fd = fd_gradient(obj, x, worker);
    const double err = dist(g, fd) / (1.0 + norm(fd));
    EXPECT_LE(err, 1e-5) << "rep " << rep;
  }
}

TEST(Objective, StochasticFullBatchIsBitIdentical) {
  const SynConfig cfg{1.0, 1.0, 2, 12, 5, 4};
  const Dataset ds = generate_synthetic(cfg);
  const Objective obj(ds, 0.2);
  const ParamVector x = random_point(8, ds.d);
  RandomStream rng(99, kStreamGradient);
  const ParamVector full = obj.stochastic_grad(x, 1, ds.m, rng);
  const ParamVector direct = obj.local_grad(x, 1);
  ASSERT_EQ(full.size(), direct.size());
  for (std::size_t k = 0; k < full.size(); ++k) EXPECT_EQ(full[k], direct[k]);
}

TEST(Objective, StochasticGradientUnbiased) {
  const SynConfig cfg{1.0, 1.0, 2, 20, 4, 15};
  const Dataset ds = generate_synthetic(cfg);
  const Objective obj(ds, 0.1);
  const ParamVector x = random_point(3, ds.d);
  const ParamVector mean_true = obj.local_grad(x, 0);
  const int draws = 10000;
  RandomStream rng(7, kStreamGradient);
  ParamVector sum(ds.d, 0.0), sum_sq(ds.d, 0.0);
  for (int r = 0; r < draws; ++r) {
    const ParamVector g = obj.stochastic_grad(x, 0, 5, rng);
    for (std::int64_t k = 0; k < ds.d; ++k) {
      sum[k] += g[k];
      sum_sq[k] += g[k] * g[k];
    }
  }
  for (std::int64_t k = 0; k < ds.d; ++k) {
    const double mean = sum[k] / draws;
    const double var = sum_sq[k] / draws - mean * mean;
    const double se = std::sqrt(std::max(var, 0.0) / draws);
    EXPECT_NEAR(mean, mean_true[k], 3.0 * se + 1e-12) << "coordinate " << k;
  }
}

TEST(Objective, GlobalGradIsExactMeanOfLocals) {
  const SynConfig cfg{1.5, 1.5, 5, 6, 4, 2};
  const Dataset ds = generate_synthetic(cfg);
  const Objective obj(ds, 0.1);
  const ParamVector x = random_point(77, ds.d);
  const ParamVector g = obj.global_grad(x);
  ParamVector acc(ds.d, 0.0);
  for (std::int64_t i = 0; i < ds.n; ++i) axpy(1.0, obj.local_grad(x, i), acc);
  for (auto& v : acc) v *= 1.0 / static_cast<double>(ds.n);
  for (std::int64_t k = 0; k < ds.d; ++k) EXPECT_EQ(g[k], acc[k]);
}

TEST(Objective, FusedValueAndGradMatchesSeparatePaths) {
  const SynConfig cfg{1.0, 0.5, 3, 9, 5, 6};
  const Dataset ds = generate_synthetic(cfg);
  const Objective obj(ds, 0.1);
  const ParamVector x = random_point(31, ds.d);
  const LossGrad lg = obj.value_and_grad(x);
  EXPECT_NEAR(lg.loss, obj.global_loss(x), 1e-12 * (1.0 + std::abs(lg.loss)));
  const ParamVector g = obj.global_grad(x);
  for (std::int64_t k = 0; k < ds.d; ++k)
    EXPECT_NEAR(lg.grad[k], g[k], 1e-12 * (1.0 + std::abs(g[k])));
}

TEST(Objective, BatchedMetricsMatchExactPass) {
  const SynConfig cfg{1.0, 1.0, 4, 12, 7, 6};
  const Dataset ds = generate_synthetic(cfg);
  const Objective obj(ds, 0.1);
  std::vector<ParamVector> points;
  for (std::uint64_t p = 0; p < 40; ++p) points.push_back(random_point(900 + p, ds.d));
  std::vector<double> losses, gnorms;
  obj.batched_metrics(points, losses, gnorms);
  ASSERT_EQ(losses.size(), points.size());
  for (std::size_t t = 0; t < points.size(); ++t) {
    const LossGrad lg = obj.value_and_grad(points[t]);
    EXPECT_NEAR(losses[t], lg.loss, 1e-10 * (1.0 + std::abs(lg.loss))) << t;
    const double gn = norm_sq(lg.grad);
    EXPECT_NEAR(gnorms[t], gn, 1e-10 * (1.0 + gn)) << t;
  }
  obj.batched_metrics({}, losses, gnorms);
  EXPECT_TRUE(losses.empty());
}

TEST(Objective, ConstantsOnHomogeneousShards) {
  const Dataset ds = homogeneous_dataset(4);
  const Objective obj(ds, 0.1);
  const std::vector<ParamVector> probes{random_point(1, ds.d), random_point(2, ds.d)};
  const ConstantsEstimate est = obj.estimate_constants(probes);
  EXPECT_LE(est.zeta_sq, 1e-24);
  EXPECT_GT(est.g, 0.0);
}

TEST(Objective, ConstantsSingleWorker) {
  const SynConfig cfg{0.5, 0.5, 1, 8, 3, 5};
  const Dataset ds = generate_synthetic(cfg);
  const Objective obj(ds, 0.1);
  const ParamVector x = random_point(4, ds.d);
  const ConstantsEstimate est = obj.estimate_constants({x});
  EXPECT_EQ(est.zeta_sq, 0.0);
  EXPECT_EQ(est.g, norm(obj.global_grad(x)));
}

TEST(Objective, HeterogeneityOrderingAcrossSynSettings) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset lo = generate_synthetic({0.5, 0.5, 6, 30, 8, seed});
    const Dataset hi = generate_synthetic({1.5, 1.5, 6, 30, 8, seed});
    const Objective obj_lo(lo, 0.1), obj_hi(hi, 0.1);
    std::vector<ParamVector> probes;
    for (std::uint64_t p = 0; p < 4; ++p) probes.push_back(random_point(50 + p, 8));
    if (obj_hi.estimate_constants(probes).zeta_sq > obj_lo.estimate_constants(probes).zeta_sq)
      ++wins;
  }
  EXPECT_GE(wins, 3) << "median over 5 seeds must favor the more heterogeneous setting";
}

TEST(Objective, SmoothnessEstimatePositive) {
  const SynConfig cfg{1.0, 1.0, 3, 10, 5, 8};
  const Dataset ds = generate_synthetic(cfg);
  const Objective obj(ds, 0.1);
  std::vector<ParamVector> probes;
  for (std::uint64_t p = 0; p < 5; ++p) probes.push_back(random_point(60 + p, ds.d));
  const double l_hat = obj.estimate_smoothness(probes);
  EXPECT_GT(l_hat, 0.0);
  EXPECT_TRUE(std::isfinite(l_hat));
  EXPECT_THROW(obj.estimate_smoothness({probes[0]}), ParameterError);
}

TEST(Objective, ErrorPaths) {
  const Dataset ds = tiny_dataset();
  const Objective obj(ds, 0.1);
  const ParamVector x(3, 0.0);
  const ParamVector bad(2, 0.0);
  RandomStream rng(1, kStreamGradient);
  EXPECT_THROW(obj.local_loss(x, 2), IndexError);
  EXPECT_THROW(obj.local_loss(bad, 0), DimensionError);
  EXPECT_THROW(obj.local_grad(x, -1), IndexError);
  EXPECT_THROW(obj.stochastic_grad(x, 0, 0, rng), ParameterError);
  EXPECT_THROW(obj.stochastic_grad(x, 0, 3, rng), ParameterError);
  EXPECT_THROW(obj.estimate_constants({}), ParameterError);
  EXPECT_THROW(Objective(ds, -0.1), ParameterError);
}
