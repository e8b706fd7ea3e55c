#include "asgrad/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

using namespace asgrad;

TEST(Rng, DeterministicAndStreamSeparated) {
  RandomStream a(42, kStreamTiming), b(42, kStreamTiming), c(42, kStreamStrategy);
  bool any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next();
    EXPECT_EQ(va, b.next());
    any_diff = any_diff || (va != c.next());
  }
  EXPECT_TRUE(any_diff);
}

TEST(Rng, U01Range) {
  RandomStream rng(7, kStreamInit);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.u01();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const double v = rng.u01_open();
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Rng, NormalConsumesTwoRawDraws) {
  RandomStream a(3, kStreamInit), b(3, kStreamInit);
  a.normal();
  b.next();
  b.next();
  EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, NormalMoments) {
  RandomStream rng(11, kStreamInit);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Rng, PoissonMean) {
  RandomStream rng(5, kStreamTiming);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(rng.poisson(4.0));
  EXPECT_NEAR(sum / n, 4.0, 4.0 * std::sqrt(4.0 / n));
}

TEST(Rng, BelowStaysInRangeAndCoversValues) {
  RandomStream rng(9, kStreamStrategy);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 5000; ++i) {
    const std::uint64_t v = rng.below(10);
    ASSERT_LT(v, 10u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_THROW(rng.below(0), ParameterError);
}

TEST(Rng, PermutationIsPermutation) {
  RandomStream rng(13, kStreamStrategy);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = rng.permutation(17);
    std::set<int> s(p.begin(), p.end());
    EXPECT_EQ(s.size(), 17u);
    EXPECT_EQ(*s.begin(), 0);
    EXPECT_EQ(*s.rbegin(), 16);
  }
}

TEST(Rng, SampleWithoutReplacement) {
  RandomStream rng(17, kStreamGradient);
  for (int rep = 0; rep < 50; ++rep) {
    auto s = rng.sample_without_replacement(20, 7);
    ASSERT_EQ(s.size(), 7u);
    std::set<int> dedup(s.begin(), s.end());
    EXPECT_EQ(dedup.size(), 7u);
    for (int v : s) {
      EXPECT_GE(v, 0);
      EXPECT_LT(v, 20);
    }
  }
  EXPECT_THROW(rng.sample_without_replacement(5, 6), ParameterError);
}
