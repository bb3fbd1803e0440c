#pragma once

#include <cstddef>
#include <vector>

namespace rfpx::kernels {

// C (m×n) += A (m×k) · B (k×n), all row-major. The inner loop runs along a
// row of C, so every output entry accumulates its k terms in the same order
// regardless of which row it sits in.
inline void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double s = arow[t];
      const double* brow = b + t * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

inline std::vector<double> transposed(const double* a, std::size_t m, std::size_t n) {
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

}  // namespace rfpx::kernels
