#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lvnet/image.hpp"

namespace lvnet {

/// Raised for malformed dataset files; carries the byte offset of the problem.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

struct LabeledImageSet {
  std::string name;
  std::size_t classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // [count, 3, H, W]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_bytes() const { return 3 * height * width; }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * image_bytes(), image_bytes()};
  }
  /// Throws unless every buffer and label is consistent.
  void validate() const;
  ImageBatch gather(std::span<const std::size_t> indices) const;
  ImageBatch all_images() const;
  std::vector<std::size_t> class_counts() const;
};

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

/// Reads 3073-byte CIFAR-10 records (label, 1024 R, 1024 G, 1024 B). With
/// `per_class` > 0 only the first `per_class` images of each class are kept.
LabeledImageSet load_cifar10_binary(const std::filesystem::path& path, std::size_t per_class = 0);
LabeledImageSet load_cifar10_binary(const std::vector<std::filesystem::path>& paths, std::size_t per_class = 0);

/// Record-format writer for arbitrary H x W sets plus a `<path>.hdr` sidecar
/// holding classes, height, width and count.
void save_image_set(const LabeledImageSet& set, const std::filesystem::path& path);
LabeledImageSet load_image_set(const std::filesystem::path& path);

struct AugmentSpec {
  bool enabled = false;
  std::size_t pad = 4;
  /// Crop side; 0 keeps the original size.
  std::size_t crop = 0;
  double hflip_prob = 0.5;
};

struct CropPlacement {
  std::size_t y = 0;
  std::size_t x = 0;
  bool flip = false;
};

/// Draws a crop origin uniformly over the (H + 2 pad - crop + 1) x (W + 2 pad - crop + 1)
/// positions and a flip with probability hflip_prob.
CropPlacement sample_placement(const AugmentSpec& spec, std::size_t height, std::size_t width, std::mt19937_64& rng);

/// Zero-pads, crops at `where` and optionally mirrors horizontally. Pixels stay bytes.
std::vector<std::uint8_t> apply_placement(std::span<const std::uint8_t> image, std::size_t height, std::size_t width,
                                          const AugmentSpec& spec, const CropPlacement& where);

/// Identity when `spec.enabled` is false.
std::vector<std::uint8_t> augment(std::span<const std::uint8_t> image, std::size_t height, std::size_t width,
                                  const AugmentSpec& spec, std::mt19937_64& rng);

enum class SyntheticKind { separable, striped };

/// Color band [start, start + width) carrying class k out of K in synthetic sets.
std::pair<int, int> synthetic_band(std::size_t k, std::size_t classes);

/// Class-balanced byte images whose class is carried by the colors present.
/// separable: every pixel of every channel is uniform in the class band.
/// striped: stripes alternating a class-band color with a per-image random color.
LabeledImageSet make_synthetic(SyntheticKind kind, std::size_t per_class, std::size_t classes, std::size_t height,
                               std::size_t width, std::uint64_t seed);

/// The first `per_class` images of each class, in original order.
LabeledImageSet balanced_subset(const LabeledImageSet& set, std::size_t per_class);

struct Batch {
  ImageBatch images;
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

/// Seeded per-epoch shuffled mini-batches; the final partial batch is emitted.
class BatchIterator {
 public:
  BatchIterator(const LabeledImageSet& set, std::size_t batch_size, std::uint64_t seed, bool shuffle = true);

  /// Reshuffles and rewinds. Called implicitly before the first batch.
  void start_epoch();
  bool next(Batch& out);
  std::size_t batches_per_epoch() const;

 private:
  const LabeledImageSet* set_;
  std::size_t batch_size_;
  bool shuffle_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  bool started_ = false;
};

}  // namespace lvnet
