#include "lvnet/costing.hpp"

#include <sstream>
#include <stdexcept>

#include "lvnet/lookup.hpp"

namespace lvnet {
namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

void require_positive(std::initializer_list<std::uint64_t> values) {
  for (auto v : values)
    if (v == 0) throw std::invalid_argument("cost model arguments must be at least 1");
}

}  // namespace

std::uint64_t extra_params(std::uint64_t u, std::uint64_t k, std::uint64_t j) {
  require_positive({u, k, j});
  return 256 * 3 * u + k * k * 3 * (u - 1) * j;
}

std::uint64_t extra_params_compressed(int cmp_rate) { return 3 * compressed_table_size(cmp_rate); }

std::uint64_t first_layer_flops(std::uint64_t m, std::uint64_t n, std::uint64_t s, std::uint64_t k, std::uint64_t j,
                                 std::uint64_t channels) {
  require_positive({m, n, s, k, j, channels});
  return ceil_div(m, s) * ceil_div(n, s) * j * (2 * k * k * channels + 1);
}

std::uint64_t extra_flops(std::uint64_t m, std::uint64_t n, std::uint64_t s, std::uint64_t k, std::uint64_t j,
                          std::uint64_t u) {
  return m * n * 3 + first_layer_flops(m, n, s, k, j, 3 * u) - first_layer_flops(m, n, s, k, j, 3);
}

int pixel_bits(int cmp_rate) {
  const std::size_t levels = compressed_table_size(cmp_rate);
  int bits = 0;
  while ((std::size_t{1} << bits) < levels) ++bits;
  return 3 * bits;
}

CostReport cost_report(const CostInputs& in) {
  CostReport r;
  r.inputs = in;
  if (in.cmp_rate) {
    r.inputs.u = 1;
    r.extra_parameters = extra_params_compressed(*in.cmp_rate);
    r.extra_flops = extra_flops(in.m, in.n, in.s, in.k, in.j, 1);
    r.bits_per_pixel = pixel_bits(*in.cmp_rate);
  } else {
    r.extra_parameters = extra_params(in.u, in.k, in.j);
    r.extra_flops = extra_flops(in.m, in.n, in.s, in.k, in.j, in.u);
    r.bits_per_pixel = pixel_bits(1);
  }
  return r;
}

std::string render_text(const CostReport& r) {
  std::ostringstream out;
  const auto& i = r.inputs;
  out << "assumptions: m=" << i.m << " n=" << i.n << " s=" << i.s << " k=" << i.k << " j=" << i.j;
  if (i.cmp_rate)
    out << " c=" << *i.cmp_rate << " (compressed)\n";
  else
    out << " u=" << i.u << " (full)\n";
  out << "extra-parameters: " << r.extra_parameters << "\n"
      << "extra-flops: " << r.extra_flops << "\n"
      << "bits-per-pixel: " << r.bits_per_pixel << "\n";
  return out.str();
}

std::string render_key_values(const CostReport& r) {
  std::ostringstream out;
  const auto& i = r.inputs;
  out << "m=" << i.m << "\nn=" << i.n << "\ns=" << i.s << "\nk=" << i.k << "\nj=" << i.j << "\nu=" << i.u << "\n";
  if (i.cmp_rate) out << "c=" << *i.cmp_rate << "\n";
  out << "extra_parameters=" << r.extra_parameters << "\nextra_flops=" << r.extra_flops
      << "\nbits_per_pixel=" << r.bits_per_pixel << "\n";
  return out.str();
}

}  // namespace lvnet
