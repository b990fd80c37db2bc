#pragma once

#include <cstddef>

// Row-major accumulate-into GEMM kernels. Loop orders are fixed, so results
// are bit-reproducible for identical inputs.
namespace modlab::kernels {

// C[n,m] += A[n,k] * B[k,m]
inline void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b,
                    double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[n,m] += A[n,k] * B[m,k]^T
inline void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b,
                    double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * m + j] += acc;
    }
  }
}

// C[k,m] += A[n,k]^T * B[n,m]
inline void gemm_tn(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b,
                    double* c) {
  for (std::size_t p = 0; p < n; ++p) {
    const double* bp = b + p * m;
    for (std::size_t i = 0; i < k; ++i) {
      const double av = a[p * k + i];
      double* ci = c + i * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

}  // namespace modlab::kernels
