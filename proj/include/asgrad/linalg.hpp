// Small dense-vector helpers used throughout the simulator.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "asgrad/errors.hpp"

namespace asgrad {

using ParamVector = std::vector<double>;

// Eight independent accumulator chains; breaks the FMA latency bound and
// lets the compiler vectorize the reduction without global reassociation.
inline double dot(const double* __restrict a, const double* __restrict b, std::size_t d) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0, s5 = 0.0, s6 = 0.0, s7 = 0.0;
  std::size_t k = 0;
  for (; k + 8 <= d; k += 8) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
    s4 += a[k + 4] * b[k + 4];
    s5 += a[k + 5] * b[k + 5];
    s6 += a[k + 6] * b[k + 6];
    s7 += a[k + 7] * b[k + 7];
  }
  double s = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
  for (; k < d; ++k) s += a[k] * b[k];
  return s;
}

inline double dot(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  return dot(a.data(), b.data(), a.size());
}

// y += alpha * x
inline void axpy(double alpha, const double* __restrict x, double* __restrict y,
                 std::size_t d) {
  for (std::size_t k = 0; k < d; ++k) y[k] += alpha * x[k];
}

inline void axpy(double alpha, const ParamVector& x, ParamVector& y) {
  if (x.size() != y.size()) throw DimensionError("axpy: size mismatch");
  axpy(alpha, x.data(), y.data(), x.size());
}

inline double norm_sq(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double norm(const ParamVector& v) { return std::sqrt(norm_sq(v)); }

inline double dist_sq(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw DimensionError("dist_sq: size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

inline double dist(const ParamVector& a, const ParamVector& b) {
  return std::sqrt(dist_sq(a, b));
}

inline bool all_finite(const ParamVector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace asgrad
