#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lvnet {

/// N byte-valued RGB images stored planar, [N,3,H,W].
struct ImageBatch {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t image_bytes() const { return 3 * height * width; }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * image_bytes(), image_bytes()};
  }
  std::span<std::uint8_t> image(std::size_t i) { return {pixels.data() + i * image_bytes(), image_bytes()}; }
};

}  // namespace lvnet
