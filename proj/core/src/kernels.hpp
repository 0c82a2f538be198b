#pragma once

#include <cstddef>

// Inner loops shared by the tensor operations. Accumulation order is fixed
// for a given length so results are bit-reproducible.

namespace yieldnet::kernels {

inline double dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double acc[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    for (std::size_t k = 0; k < 8; ++k) acc[k] += a[j + k] * b[j + k];
  }
  double tail = 0.0;
  for (; j < n; ++j) tail += a[j] * b[j];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

inline void axpy(double alpha, const double* __restrict x, double* __restrict y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

inline double sum(const double* x, std::size_t n) {
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) total += x[j];
  return total;
}

}  // namespace yieldnet::kernels
