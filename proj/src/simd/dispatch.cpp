#include <cstdlib>
#include <string>

#include "lvnet/simd.hpp"

namespace lvnet::simd {

#if defined(LVNET_HAVE_AVX2)
namespace detail {
double dot_avx2(std::size_t n, const double* x, const double* y);
void axpy_avx2(std::size_t n, double a, const double* x, double* y);
}  // namespace detail
#endif

namespace {

bool cpu_has_avx2() {
#if defined(LVNET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* initial_selection() {
  const char* env = std::getenv("LVNET_SIMD");
  if (env && std::string(env) == "scalar") return &scalar_kernels();
  if (const Kernels* k = avx2_kernels()) return k;
  return &scalar_kernels();
}

const Kernels*& current() {
  static const Kernels* k = initial_selection();
  return k;
}

}  // namespace

const Kernels* avx2_kernels() {
#if defined(LVNET_HAVE_AVX2)
  static const Kernels k{"avx2", detail::dot_avx2, detail::axpy_avx2};
  static const bool ok = cpu_has_avx2();
  return ok ? &k : nullptr;
#else
  return nullptr;
#endif
}

const Kernels& active() { return *current(); }

bool select(std::string_view name) {
  if (name == "scalar") {
    current() = &scalar_kernels();
    return true;
  }
  if (name == "avx2" && avx2_kernels()) {
    current() = avx2_kernels();
    return true;
  }
  return false;
}

}  // namespace lvnet::simd
