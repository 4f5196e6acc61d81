#pragma once

#include <cstddef>

namespace lvnet {

// Row-major matrix products on raw buffers, accumulating into C.
// Dimensions: C is m x n; the shared dimension is k.

/// C += A(m x k) * B(k x n)
void gemm_nn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

/// C += A(m x k) * B(n x k)^T
void gemm_nt_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

/// C += A(k x m)^T * B(k x n)
void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

}  // namespace lvnet
