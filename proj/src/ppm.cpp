#include "lvnet/ppm.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>
#include <string>

namespace lvnet {
namespace {

std::size_t read_header_number(std::istream& in, const std::filesystem::path& path) {
  int c = in.peek();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      in.get();
    }
    c = in.peek();
  }
  std::size_t v = 0;
  if (!(in >> v)) throw std::runtime_error(path.string() + ": malformed PPM header");
  return v;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, std::span<const std::uint8_t> planar, std::size_t height,
               std::size_t width) {
  const std::size_t plane = height * width;
  if (planar.size() != 3 * plane) throw std::invalid_argument("write_ppm: buffer is not a 3-channel image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P6\n" << width << " " << height << "\n255\n";
  std::vector<char> rgb(3 * plane);
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t ch = 0; ch < 3; ++ch) rgb[3 * p + ch] = static_cast<char>(planar[ch * plane + p]);
  out.write(rgb.data(), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ImageBatch read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") throw std::runtime_error(path.string() + ": not a binary PPM (P6)");
  const std::size_t width = read_header_number(in, path);
  const std::size_t height = read_header_number(in, path);
  const std::size_t maxval = read_header_number(in, path);
  if (maxval != 255) throw std::runtime_error(path.string() + ": only maxval 255 is supported");
  in.get();
  const std::size_t plane = height * width;
  std::vector<char> rgb(3 * plane);
  if (!in.read(rgb.data(), static_cast<std::streamsize>(rgb.size())))
    throw std::runtime_error(path.string() + ": truncated pixel data");
  ImageBatch img{1, height, width, std::vector<std::uint8_t>(3 * plane)};
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t ch = 0; ch < 3; ++ch) img.pixels[ch * plane + p] = static_cast<std::uint8_t>(rgb[3 * p + ch]);
  return img;
}

}  // namespace lvnet
