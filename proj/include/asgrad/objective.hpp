// Finite-sum objective: regularized logistic regression with the bounded
// nonconvex penalty sum_k x_k^2 / (1 + x_k^2).
//
//   f_i(x) = (1/m) sum_j log(1 + exp(-b_ij a_ij^T x)) + lambda * penalty(x)
//   f(x)   = (1/n) sum_i f_i(x)
//
// log(1 + e^u) is evaluated as log1p(e^u) for u <= 0 and u + log1p(e^-u)
// otherwise, so large margins never overflow.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "asgrad/blas.hpp"
#include "asgrad/dataset.hpp"
#include "asgrad/errors.hpp"
#include "asgrad/linalg.hpp"
#include "asgrad/rng.hpp"

namespace asgrad {

inline double log1p_exp(double u) {
  if (u <= 0.0) return std::log1p(std::exp(u));
  return u + std::log1p(std::exp(-u));
}

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

struct ConstantsEstimate {
  double zeta_sq = 0.0;  // max_i,x ||grad f_i - grad f||^2 over the probes
  double g = 0.0;        // max_i,x ||grad f_i|| over the probes
};

class Objective {
 public:
  Objective(const Dataset& data, double lambda) : data_(data), lambda_(lambda) {
    if (lambda < 0.0) throw ParameterError("lambda must be >= 0");
    labels_.resize(static_cast<std::size_t>(data.n * data.m));
    for (std::size_t s = 0; s < labels_.size(); ++s)
      labels_[s] = static_cast<double>(data.labels[s]);
  }

  const Dataset& data() const { return data_; }
  double lambda() const { return lambda_; }
  std::int64_t num_workers() const { return data_.n; }
  std::int64_t shard_size() const { return data_.m; }
  std::int64_t dim() const { return data_.d; }

  double local_loss(const ParamVector& x, std::int64_t worker) const {
    check_args(x, worker);
    const std::int64_t m = data_.m, d = data_.d;
    double sum = 0.0;
    for (std::int64_t j = 0; j < m; ++j) {
      const double z = dot(data_.row(worker, j), x.data(), static_cast<std::size_t>(d));
      sum += log1p_exp(-label(worker, j) * z);
    }
    return sum / static_cast<double>(m) + lambda_ * penalty(x);
  }

  void local_grad(const ParamVector& x, std::int64_t worker, ParamVector& out) const {
    check_args(x, worker);
    out.assign(x.size(), 0.0);
    const std::int64_t m = data_.m;
    for (std::int64_t j = 0; j < m; ++j) accumulate_sample_grad(x, worker, j, out);
    finish_grad(x, static_cast<double>(m), out);
  }

  ParamVector local_grad(const ParamVector& x, std::int64_t worker) const {
    ParamVector g;
    local_grad(x, worker, g);
    return g;
  }

  // Mini-batch gradient over batch_size indices drawn uniformly without
  // replacement from the worker's shard, plus the full penalty gradient.
  // Indices are summed in sorted order, so batch_size == m reproduces
  // local_grad bit-for-bit.
  ParamVector stochastic_grad(const ParamVector& x, std::int64_t worker,
                              std::int64_t batch_size, RandomStream& rng) const {
    check_args(x, worker);
    if (batch_size < 1 || batch_size > data_.m)
      throw ParameterError("batch_size must be in [1, m]");
    auto batch = rng.sample_without_replacement(static_cast<int>(data_.m),
                                                static_cast<int>(batch_size));
    std::sort(batch.begin(), batch.end());
    ParamVector out(x.size(), 0.0);
    for (int j : batch) accumulate_sample_grad(x, worker, j, out);
    finish_grad(x, static_cast<double>(batch_size), out);
    return out;
  }

  void global_grad(const ParamVector& x, ParamVector& out) const {
    check_dim(x);
    out.assign(x.size(), 0.0);
    ParamVector gi;
    for (std::int64_t i = 0; i < data_.n; ++i) {
      local_grad(x, i, gi);
      axpy(1.0, gi, out);
    }
    const double inv_n = 1.0 / static_cast<double>(data_.n);
    for (double& v : out) v *= inv_n;
  }

  ParamVector global_grad(const ParamVector& x) const {
    ParamVector g;
    global_grad(x, g);
    return g;
  }

  double global_loss(const ParamVector& x) const {
    check_dim(x);
    double s = 0.0;
    for (std::int64_t i = 0; i < data_.n; ++i) s += local_loss(x, i);
    return s / static_cast<double>(data_.n);
  }

  // Fused full-objective loss + gradient in one pass over all samples; this
  // is the per-iteration metrics hot path.
  LossGrad value_and_grad(const ParamVector& x) const {
    check_dim(x);
    const std::int64_t d = data_.d;
    const std::int64_t total = data_.n * data_.m;
    LossGrad r;
    r.grad.assign(x.size(), 0.0);
    const double* xp = x.data();
    double* gp = r.grad.data();
    double loss_sum = 0.0;
    for (std::int64_t s = 0; s < total; ++s) {
      const double* a = data_.features.data() + static_cast<std::size_t>(s * d);
      const double b = labels_[static_cast<std::size_t>(s)];
      const double u = -b * dot(a, xp, static_cast<std::size_t>(d));
      double sig, lo;
      if (u <= 0.0) {
        const double e = std::exp(u);
        lo = std::log1p(e);
        sig = e / (1.0 + e);
      } else {
        const double e = std::exp(-u);
        lo = u + std::log1p(e);
        sig = 1.0 / (1.0 + e);
      }
      loss_sum += lo;
      axpy(-b * sig, a, gp, static_cast<std::size_t>(d));
    }
    const double inv = 1.0 / static_cast<double>(total);
    r.loss = loss_sum * inv + lambda_ * penalty(x);
    for (std::int64_t k = 0; k < d; ++k) {
      gp[k] = gp[k] * inv + lambda_ * penalty_grad_coord(xp[k]);
    }
    if (!all_finite(r.grad)) throw DataError("non-finite gradient");
    return r;
  }

  // Loss and squared full-gradient norm for a whole batch of parameter
  // vectors at once, evaluated tile-by-tile as two GEMMs (z = X a^T, then
  // g = coef A).  Used to fill per-iteration metrics after a run instead of
  // streaming the feature matrix once per step; agrees with value_and_grad
  // up to summation order.
  void batched_metrics(const std::vector<ParamVector>& points, std::vector<double>& losses,
                       std::vector<double>& grad_norms_sq) const;

  // Empirical lower estimates of the heterogeneity and Lipschitz constants;
  // the true constants are suprema over all of R^d.
  ConstantsEstimate estimate_constants(const std::vector<ParamVector>& probes) const {
    if (probes.empty()) throw ParameterError("estimate_constants: no probe points");
    ConstantsEstimate est;
    ParamVector gi, g;
    for (const auto& x : probes) {
      global_grad(x, g);
      for (std::int64_t i = 0; i < data_.n; ++i) {
        local_grad(x, i, gi);
        est.g = std::max(est.g, norm(gi));
        est.zeta_sq = std::max(est.zeta_sq, dist_sq(gi, g));
      }
    }
    return est;
  }

  // Max pairwise secant slope of the full gradient over the probes.
  double estimate_smoothness(const std::vector<ParamVector>& probes) const {
    if (probes.size() < 2) throw ParameterError("estimate_smoothness: need >= 2 probes");
    std::vector<ParamVector> grads(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) global_grad(probes[i], grads[i]);
    double best = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      for (std::size_t j = i + 1; j < probes.size(); ++j) {
        const double dx = dist(probes[i], probes[j]);
        if (dx == 0.0) continue;
        best = std::max(best, dist(grads[i], grads[j]) / dx);
      }
    }
    return best;
  }

  static double penalty_grad_coord(double xk) {
    const double q = 1.0 + xk * xk;
    return 2.0 * xk / (q * q);
  }

 private:
  double label(std::int64_t worker, std::int64_t sample) const {
    return labels_[static_cast<std::size_t>(worker * data_.m + sample)];
  }

  double penalty(const ParamVector& x) const {
    double s = 0.0;
    for (double xk : x) s += xk * xk / (1.0 + xk * xk);
    return s;
  }

  void accumulate_sample_grad(const ParamVector& x, std::int64_t worker,
                              std::int64_t sample, ParamVector& out) const {
    const double* a = data_.row(worker, sample);
    const double b = label(worker, sample);
    const double z = dot(a, x.data(), x.size());
    axpy(-b * sigmoid(-b * z), a, out.data(), out.size());
  }

  void finish_grad(const ParamVector& x, double count, ParamVector& out) const {
    const double inv = 1.0 / count;
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = out[k] * inv + lambda_ * penalty_grad_coord(x[k]);
    }
    if (!all_finite(out)) throw DataError("non-finite gradient");
  }

  void check_dim(const ParamVector& x) const {
    if (static_cast<std::int64_t>(x.size()) != data_.d)
      throw DimensionError("parameter vector has wrong dimension");
  }

  void check_args(const ParamVector& x, std::int64_t worker) const {
    check_dim(x);
    if (worker < 0 || worker >= data_.n) throw IndexError("worker index out of range");
  }

  const Dataset& data_;
  double lambda_;
  std::vector<double> labels_;
};

inline void Objective::batched_metrics(const std::vector<ParamVector>& points,
                                       std::vector<double>& losses,
                                       std::vector<double>& grad_norms_sq) const {
  const std::int64_t count = static_cast<std::int64_t>(points.size());
  const std::int64_t d = data_.d;
  const std::int64_t total = data_.n * data_.m;
  losses.assign(static_cast<std::size_t>(count), 0.0);
  grad_norms_sq.assign(static_cast<std::size_t>(count), 0.0);
  if (count == 0) return;
  const double inv = 1.0 / static_cast<double>(total);

  const std::int64_t tile = std::min<std::int64_t>(count, 512);
  std::vector<double> x_tile(static_cast<std::size_t>(tile * d));
  std::vector<double> z(static_cast<std::size_t>(tile * total));
  std::vector<double> g(static_cast<std::size_t>(tile * d));

  for (std::int64_t lo = 0; lo < count; lo += tile) {
    const std::int64_t tb = std::min<std::int64_t>(tile, count - lo);
    for (std::int64_t t = 0; t < tb; ++t) {
      const ParamVector& x = points[static_cast<std::size_t>(lo + t)];
      if (static_cast<std::int64_t>(x.size()) != d)
        throw DimensionError("batched_metrics: wrong parameter dimension");
      std::copy(x.begin(), x.end(), x_tile.begin() + static_cast<std::ptrdiff_t>(t * d));
    }
    detail_blas::gemm_nt(tb, total, d, x_tile.data(), data_.features.data(), z.data());
    for (std::int64_t t = 0; t < tb; ++t) {
      double loss_sum = 0.0;
      double* zrow = z.data() + static_cast<std::size_t>(t * total);
      for (std::int64_t s = 0; s < total; ++s) {
        const double b = labels_[static_cast<std::size_t>(s)];
        const double u = -b * zrow[s];
        double sig, lo_term;
        if (u <= 0.0) {
          const double e = std::exp(u);
          lo_term = std::log1p(e);
          sig = e / (1.0 + e);
        } else {
          const double e = std::exp(-u);
          lo_term = u + std::log1p(e);
          sig = 1.0 / (1.0 + e);
        }
        loss_sum += lo_term;
        zrow[s] = -b * sig * inv;  // reuse z as the coefficient matrix
      }
      losses[static_cast<std::size_t>(lo + t)] = loss_sum * inv;
    }
    detail_blas::gemm_nn(tb, d, total, z.data(), data_.features.data(), g.data());
    for (std::int64_t t = 0; t < tb; ++t) {
      const ParamVector& x = points[static_cast<std::size_t>(lo + t)];
      const double* grow = g.data() + static_cast<std::size_t>(t * d);
      double pen = 0.0, gn = 0.0;
      for (std::int64_t k = 0; k < d; ++k) {
        const double xk = x[static_cast<std::size_t>(k)];
        pen += xk * xk / (1.0 + xk * xk);
        const double gk = grow[k] + lambda_ * penalty_grad_coord(xk);
        gn += gk * gk;
      }
      losses[static_cast<std::size_t>(lo + t)] += lambda_ * pen;
      grad_norms_sq[static_cast<std::size_t>(lo + t)] = gn;
    }
  }
}

}  // namespace asgrad
