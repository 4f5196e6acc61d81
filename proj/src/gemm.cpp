#include "lvnet/gemm.hpp"

#include "lvnet/simd.hpp"

namespace lvnet {

void gemm_nn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  const auto axpy = simd::active().axpy;
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      if (arow[p] != 0.0) axpy(n, arow[p], b + p * n, crow);
    }
  }
}

void gemm_nt_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  const auto dot = simd::active().dot;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(k, a + i * k, b + j * k);
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  const auto axpy = simd::active().axpy;
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      if (arow[i] != 0.0) axpy(n, arow[i], brow, c + i * n);
    }
  }
}

}  // namespace lvnet
