#include "lvnet/lookup.hpp"

#include <memory>
#include <random>
#include <stdexcept>
#include <string>

namespace lvnet {
namespace {

void check_rate(int cmp_rate) {
  if (cmp_rate < 1 || cmp_rate > kColorLevels)
    throw std::out_of_range("CMP-Rate must lie in [1,256], got " + std::to_string(cmp_rate));
}

Tensor uniform_table(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor t({rows, dim});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Adds upstream[n, ch*u + d, p] into dst[ch][idx * u + d]. Null channels are skipped.
void scatter_add(const Tensor& upstream, const std::uint8_t* indices, std::size_t u, std::array<double*, 3> dst) {
  const std::size_t n = upstream.dim(0), plane = upstream.dim(2) * upstream.dim(3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < 3; ++ch) {
      if (!dst[ch]) continue;
      const std::uint8_t* idx = indices + (i * 3 + ch) * plane;
      const double* src = upstream.ptr() + (i * 3 * u + ch * u) * plane;
      double* g = dst[ch];
      for (std::size_t p = 0; p < plane; ++p)
        for (std::size_t d = 0; d < u; ++d) g[idx[p] * u + d] += src[d * plane + p];
    }
}

}  // namespace

std::size_t compressed_table_size(int cmp_rate) {
  check_rate(cmp_rate);
  return static_cast<std::size_t>((kColorLevels + cmp_rate - 1) / cmp_rate);
}

std::size_t compressed_index(int color, int cmp_rate) {
  check_rate(cmp_rate);
  if (color < 0 || color >= kColorLevels) throw std::out_of_range("color " + std::to_string(color) + " is not a byte");
  return static_cast<std::size_t>(color / cmp_rate);
}

LookupTables::LookupTables(TableKind kind, std::size_t dim, int cmp_rate, std::array<Tensor, 3> tables)
    : kind_(kind),
      dim_(dim),
      cmp_rate_(cmp_rate),
      rows_(kind == TableKind::full ? kColorLevels : compressed_table_size(cmp_rate)),
      tables_(std::move(tables)) {
  for (const Tensor& t : tables_)
    if (t.shape() != Shape{rows_, dim_}) throw ShapeError("lookup table", t.shape(), Shape{rows_, dim_});
}

LookupTables LookupTables::full(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("vector dimension u must be at least 1");
  std::mt19937_64 rng(seed);
  std::array<Tensor, 3> t;
  for (auto& table : t) table = uniform_table(kColorLevels, dim, rng);
  return LookupTables(TableKind::full, dim, 1, std::move(t));
}

LookupTables LookupTables::compressed(int cmp_rate, std::uint64_t seed) {
  const std::size_t rows = compressed_table_size(cmp_rate);
  std::mt19937_64 rng(seed);
  std::array<Tensor, 3> t;
  for (auto& table : t) table = uniform_table(rows, 1, rng);
  return LookupTables(TableKind::compressed, 1, cmp_rate, std::move(t));
}

LookupTables LookupTables::from_tables(TableKind kind, int dim_or_rate, std::array<Tensor, 3> tables) {
  if (kind == TableKind::full) {
    if (dim_or_rate < 1) throw std::invalid_argument("vector dimension u must be at least 1");
    return LookupTables(kind, static_cast<std::size_t>(dim_or_rate), 1, std::move(tables));
  }
  check_rate(dim_or_rate);
  return LookupTables(kind, 1, dim_or_rate, std::move(tables));
}

LookupResult lookup(const ImageBatch& images, const LookupTables& tables) {
  const std::size_t n = images.count, plane = images.height * images.width, u = tables.dim();
  if (images.pixels.size() != n * 3 * plane)
    throw std::invalid_argument("image batch holds " + std::to_string(images.pixels.size()) + " bytes, expected " +
                                std::to_string(n * 3 * plane));
  LookupResult r{Tensor({n, 3 * u, images.height, images.width}), std::vector<std::uint8_t>(images.pixels.size())};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const Tensor& table = tables.table(ch);
      const std::uint8_t* src = images.pixels.data() + (i * 3 + ch) * plane;
      std::uint8_t* idx = r.indices.data() + (i * 3 + ch) * plane;
      double* dst = r.values.ptr() + (i * 3 * u + ch * u) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t row = tables.row_of(src[p]);
        idx[p] = static_cast<std::uint8_t>(row);
        for (std::size_t d = 0; d < u; ++d) dst[d * plane + p] = table[row * u + d];
      }
    }
  return r;
}

std::array<Tensor, 3> lookup_backward(const Tensor& upstream, std::span<const std::uint8_t> indices,
                                      const LookupTables& tables) {
  const std::size_t u = tables.dim();
  if (upstream.rank() != 4 || upstream.dim(1) != 3 * u)
    throw ShapeError("lookup_backward", upstream.shape(), Shape{0, 3 * u, 0, 0});
  const std::size_t n = upstream.dim(0), plane = upstream.dim(2) * upstream.dim(3);
  if (indices.size() != n * 3 * plane)
    throw std::invalid_argument("lookup_backward: index count does not match upstream gradient");
  std::array<Tensor, 3> grads;
  for (auto& g : grads) g = Tensor({tables.rows(), u});
  scatter_add(upstream, indices.data(), u, {grads[0].ptr(), grads[1].ptr(), grads[2].ptr()});
  return grads;
}

Var lookup(Tape& tape, const ImageBatch& images, const LookupTables& tables, bool trainable) {
  LookupResult r = lookup(images, tables);
  if (!trainable) return tape.constant(std::move(r.values));
  std::vector<Var> inputs;
  for (std::size_t ch = 0; ch < 3; ++ch)
    inputs.push_back(tape.parameter(std::string(kTableParamNames[ch]), tables.table(ch)));
  auto indices = std::make_shared<std::vector<std::uint8_t>>(std::move(r.indices));
  const std::size_t u = tables.dim();
  return tape.record(std::move(r.values), std::move(inputs),
                     [indices, u](const Tape&, const Tensor& dy, std::span<Tensor* const> grads) {
                       std::array<double*, 3> dst{};
                       for (std::size_t ch = 0; ch < 3; ++ch) dst[ch] = grads[ch] ? grads[ch]->ptr() : nullptr;
                       scatter_add(dy, indices->data(), u, dst);
                     });
}

}  // namespace lvnet
