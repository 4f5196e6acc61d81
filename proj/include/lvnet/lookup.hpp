#pragma once

// Learnable per-channel color lookup tables. Each of the R, G and B channels
// owns one table indexed by the 8-bit color value (full tables, 256 rows of
// u-vectors) or by a contiguous color bucket floor(color / c) (compressed
// tables, ceil(256 / c) rows of scalars).
//
// Output layout of a lookup is [N, 3u, H, W] with channel planes ordered
// R_0..R_{u-1}, G_0..G_{u-1}, B_0..B_{u-1}.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lvnet/image.hpp"
#include "lvnet/tape.hpp"
#include "lvnet/tensor.hpp"

namespace lvnet {

enum class TableKind : int { full = 1, compressed = 2 };

inline constexpr int kColorLevels = 256;
inline constexpr std::array<std::string_view, 3> kTableParamNames{"lookup.r", "lookup.g", "lookup.b"};

/// ceil(256 / c) buckets per channel.
std::size_t compressed_table_size(int cmp_rate);

/// floor(color / c).
std::size_t compressed_index(int color, int cmp_rate);

class LookupTables {
 public:
  /// Three 256 x u tables, entries uniform on [-1, 1].
  static LookupTables full(std::size_t dim, std::uint64_t seed);
  /// Three ceil(256 / c)-entry scalar tables, entries uniform on [-1, 1].
  static LookupTables compressed(int cmp_rate, std::uint64_t seed);
  /// Adopts existing table contents; shapes are validated against kind and u/c.
  static LookupTables from_tables(TableKind kind, int dim_or_rate, std::array<Tensor, 3> tables);

  TableKind kind() const { return kind_; }
  /// Vector dimension u (1 for compressed tables).
  std::size_t dim() const { return dim_; }
  /// CMP-Rate c (1 for full tables).
  int cmp_rate() const { return cmp_rate_; }
  std::size_t rows() const { return rows_; }
  std::size_t output_channels() const { return 3 * dim_; }
  std::size_t parameter_count() const { return 3 * rows_ * dim_; }

  std::size_t row_of(std::uint8_t color) const {
    return kind_ == TableKind::full ? color : color / static_cast<std::size_t>(cmp_rate_);
  }

  const Tensor& table(std::size_t channel) const { return tables_.at(channel); }
  Tensor& table(std::size_t channel) { return tables_.at(channel); }
  const std::array<Tensor, 3>& tables() const { return tables_; }

  friend bool operator==(const LookupTables&, const LookupTables&) = default;

 private:
  LookupTables(TableKind kind, std::size_t dim, int cmp_rate, std::array<Tensor, 3> tables);

  TableKind kind_ = TableKind::full;
  std::size_t dim_ = 1;
  int cmp_rate_ = 1;
  std::size_t rows_ = kColorLevels;
  std::array<Tensor, 3> tables_;
};

struct LookupResult {
  Tensor values;                      // [N, 3u, H, W]
  std::vector<std::uint8_t> indices;  // [N, 3, H, W] table rows
};

LookupResult lookup(const ImageBatch& images, const LookupTables& tables);

/// Scatter-add of an upstream gradient [N, 3u, H, W] into per-channel table
/// gradients: each table row receives the sum over every pixel that read it.
std::array<Tensor, 3> lookup_backward(const Tensor& upstream, std::span<const std::uint8_t> indices,
                                      const LookupTables& tables);

/// Records a lookup on the tape. With `trainable`, the tables are registered as
/// parameters named by kTableParamNames; otherwise they enter as constants.
Var lookup(Tape& tape, const ImageBatch& images, const LookupTables& tables, bool trainable = true);

}  // namespace lvnet
