#include "lvnet/simd.hpp"

namespace lvnet::simd {
namespace {

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{"scalar", dot_scalar, axpy_scalar};
  return k;
}

}  // namespace lvnet::simd
