#pragma once

// Data-parallel inner loops used by the dense linear algebra. Each kernel has a
// scalar reference and, where the CPU supports it, a vectorized variant. The
// variant is chosen once at startup; LVNET_SIMD=scalar|avx2 overrides it.

#include <cstddef>
#include <string_view>

namespace lvnet::simd {

struct Kernels {
  std::string_view name;
  /// sum_i x[i] * y[i]
  double (*dot)(std::size_t n, const double* x, const double* y);
  /// y[i] += a * x[i]
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
};

const Kernels& scalar_kernels();

/// Null when the build or the running CPU lacks AVX2+FMA.
const Kernels* avx2_kernels();

/// The kernels selected for this process.
const Kernels& active();

/// Force a variant by name ("scalar", "avx2"). Returns false if unavailable.
bool select(std::string_view name);

}  // namespace lvnet::simd
