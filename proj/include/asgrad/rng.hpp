// Pinned, counter-based 64-bit random stream.
//
// Every random draw in the project goes through RandomStream so that runs
// are reproducible bit-for-bit across platforms and so that tests can replay
// any sub-stream independently.  The generator is SplitMix64: the state is a
// plain counter advanced by the golden-ratio increment and the output is a
// fixed 64-bit finalizer of that counter.
//
// Stream derivation: state0 = fmix64(seed ^ fmix64(stream_id * GOLDEN)).
// Draw definitions (documented because cross-language reproducibility of
// fixtures depends on them):
//   u01()        = (next() >> 11) * 2^-53               in [0, 1)
//   u01_open()   = ((next() >> 11) + 1) * 2^-53         in (0, 1]
//   normal()     = Box-Muller, exactly two raw draws:
//                  sqrt(-2 ln u1) * cos(2 pi u2), u1 in (0,1], u2 in [0,1)
//   poisson(l)   = Knuth product-of-uniforms (variable number of raw draws)
//   below(n)     = Lemire widening-multiply rejection (unbiased)
//   shuffle(v)   = Fisher-Yates, below(i+1) per position from the back
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "asgrad/errors.hpp"

namespace asgrad {

inline std::uint64_t fmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Fixed stream ids; each run owns one stream per purpose so that replaying
// e.g. the strategy stream does not depend on timing or gradient draws.
enum StreamId : std::uint64_t {
  kStreamInit = 1,      // x0 initialization
  kStreamTiming = 2,    // compute-time sampling
  kStreamStrategy = 3,  // job-assignment randomness
  kStreamGradient = 4,  // stochastic batch sampling
  kStreamData = 5,      // synthetic dataset generation
};

class RandomStream {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  RandomStream(std::uint64_t seed, std::uint64_t stream_id)
      : state_(fmix64(seed ^ fmix64(stream_id * kGolden))) {}

  std::uint64_t next() {
    state_ += kGolden;
    return fmix64(state_);
  }

  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double u01_open() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal; consumes exactly two raw draws.
  double normal() {
    const double u1 = u01_open();
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Knuth's method; fine for the small means used as per-worker speeds.
  std::int64_t poisson(double mean) {
    if (mean < 0.0) throw ParameterError("poisson mean must be >= 0");
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= u01();
    } while (p > limit);
    return k - 1;
  }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ParameterError("below(0) is undefined");
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        m = static_cast<unsigned __int128>(next()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    shuffle(p);
    return p;
  }

  // k distinct indices from [0, m), partial Fisher-Yates draw order.
  std::vector<int> sample_without_replacement(int m, int k) {
    if (k < 0 || k > m) throw ParameterError("sample size out of range");
    std::vector<int> pool(static_cast<std::size_t>(m));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(m - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

 private:
  std::uint64_t state_;
};

}  // namespace asgrad
