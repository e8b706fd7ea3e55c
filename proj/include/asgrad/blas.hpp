// Thin wrapper over the two GEMM shapes used by the batched metrics pass.
// OpenBLAS is pinned to one thread so tiled results are reproducible.
#pragma once

#include <cblas.h>

#include <cstdint>

extern "C" void openblas_set_num_threads(int);

namespace asgrad::detail_blas {

inline void pin_single_thread() {
  static const bool done = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)done;
}

// C[m x n] = A[m x k] * B[n x k]^T   (all row-major)
inline void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const double* a,
                    const double* b, double* c) {
  pin_single_thread();
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0, a, static_cast<int>(k), b,
              static_cast<int>(k), 0.0, c, static_cast<int>(n));
}

// C[m x n] = A[m x k] * B[k x n]   (all row-major)
inline void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a,
                    const double* b, double* c) {
  pin_single_thread();
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), 1.0, a, static_cast<int>(k), b,
              static_cast<int>(n), 0.0, c, static_cast<int>(n));
}

}  // namespace asgrad::detail_blas
