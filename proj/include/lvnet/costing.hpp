#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace lvnet {

/// Parameters a Lookup-VNet adds over its standard network when the first
/// layer is a k x k conv with j kernels: 256*3*u + k*k*3*(u-1)*j.
std::uint64_t extra_params(std::uint64_t u, std::uint64_t k, std::uint64_t j);

/// Parameters added by compressed tables: 3 * ceil(256 / c).
std::uint64_t extra_params_compressed(int cmp_rate);

/// Floats of one first-layer conv over an m x n input with `channels` input
/// planes, stride s and same-padding: ceil(m/s)*ceil(n/s)*j*(2*k^2*channels + 1).
std::uint64_t first_layer_flops(std::uint64_t m, std::uint64_t n, std::uint64_t s, std::uint64_t k, std::uint64_t j,
                                 std::uint64_t channels);

/// Table lookups (m*n*3) plus the first-layer growth from 3 to 3u input planes.
std::uint64_t extra_flops(std::uint64_t m, std::uint64_t n, std::uint64_t s, std::uint64_t k, std::uint64_t j,
                          std::uint64_t u);

/// Bits per RGB pixel after compressing each channel to ceil(256 / c) levels:
/// 3 * ceil(log2(levels)), 0 when a channel has a single level.
int pixel_bits(int cmp_rate);

struct CostInputs {
  std::uint64_t m = 32, n = 32, s = 1, k = 3, j = 16, u = 1;
  std::optional<int> cmp_rate;
};

struct CostReport {
  CostInputs inputs;
  std::uint64_t extra_parameters = 0;
  std::uint64_t extra_flops = 0;
  int bits_per_pixel = 24;
};

/// Full tables use u; when a CMP-Rate is given the tables are compressed
/// (u = 1) and the parameter count covers the compressed tables.
CostReport cost_report(const CostInputs& in);

std::string render_text(const CostReport& r);
std::string render_key_values(const CostReport& r);

}  // namespace lvnet
