#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lvnet/image.hpp"

namespace lvnet {

/// Writes a planar [3,H,W] byte image as binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, std::span<const std::uint8_t> planar, std::size_t height,
               std::size_t width);

/// Reads a P6 file with maxval 255 into a one-image planar batch.
ImageBatch read_ppm(const std::filesystem::path& path);

}  // namespace lvnet
