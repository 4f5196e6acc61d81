#include "lvnet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>

namespace lvnet {

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

void LabeledImageSet::validate() const {
  if (classes == 0 || height == 0 || width == 0) throw std::invalid_argument(name + ": empty geometry");
  if (pixels.size() != labels.size() * image_bytes())
    throw std::invalid_argument(name + ": pixel buffer does not match image count");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= classes)
      throw std::out_of_range(name + ": label " + std::to_string(l) + " outside [0," + std::to_string(classes) + ")");
}

ImageBatch LabeledImageSet::gather(std::span<const std::size_t> indices) const {
  ImageBatch b{indices.size(), height, width, {}};
  b.pixels.reserve(indices.size() * image_bytes());
  for (std::size_t i : indices) {
    auto img = image(i);
    b.pixels.insert(b.pixels.end(), img.begin(), img.end());
  }
  return b;
}

ImageBatch LabeledImageSet::all_images() const { return ImageBatch{size(), height, width, pixels}; }

std::vector<std::size_t> LabeledImageSet::class_counts() const {
  std::vector<std::size_t> counts(classes, 0);
  for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
  return counts;
}

namespace {

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void append_records(const std::vector<char>& bytes, std::size_t image_bytes, std::size_t classes,
                    const std::string& source, std::size_t per_class, std::vector<std::size_t>& taken,
                    LabeledImageSet& set) {
  const std::size_t record = image_bytes + 1;
  if (bytes.size() % record != 0)
    throw FormatError(source + ": truncated record, length " + std::to_string(bytes.size()) + " is not a multiple of " +
                          std::to_string(record),
                      bytes.size() - bytes.size() % record);
  for (std::size_t off = 0; off < bytes.size(); off += record) {
    const auto label = static_cast<std::uint8_t>(bytes[off]);
    if (label >= classes)
      throw FormatError(source + ": label " + std::to_string(label) + " >= " + std::to_string(classes), off);
    if (per_class && taken[label] >= per_class) continue;
    ++taken[label];
    set.labels.push_back(label);
    const auto* px = reinterpret_cast<const std::uint8_t*>(bytes.data() + off + 1);
    set.pixels.insert(set.pixels.end(), px, px + image_bytes);
  }
}

}  // namespace

LabeledImageSet load_cifar10_binary(const std::vector<std::filesystem::path>& paths, std::size_t per_class) {
  LabeledImageSet set{"cifar10", 10, kCifarSide, kCifarSide, {}, {}};
  std::vector<std::size_t> taken(10, 0);
  for (const auto& p : paths) append_records(read_file(p), set.image_bytes(), 10, p.string(), per_class, taken, set);
  return set;
}

LabeledImageSet load_cifar10_binary(const std::filesystem::path& path, std::size_t per_class) {
  return load_cifar10_binary(std::vector<std::filesystem::path>{path}, per_class);
}

void save_image_set(const LabeledImageSet& set, const std::filesystem::path& path) {
  set.validate();
  if (set.classes > 256) throw std::invalid_argument("record format stores labels in one byte");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < set.size(); ++i) {
    out.put(static_cast<char>(set.labels[i]));
    auto img = set.image(i);
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  }
  std::ofstream hdr(path.string() + ".hdr");
  hdr << "classes=" << set.classes << "\nheight=" << set.height << "\nwidth=" << set.width << "\ncount=" << set.size()
      << "\nname=" << set.name << "\n";
  if (!out || !hdr) throw std::runtime_error("failed writing " + path.string());
}

LabeledImageSet load_image_set(const std::filesystem::path& path) {
  std::ifstream hdr(path.string() + ".hdr");
  if (!hdr) throw std::runtime_error("missing header sidecar " + path.string() + ".hdr");
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(hdr, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto num = [&](const char* key) -> std::size_t {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error(path.string() + ".hdr: missing key " + key);
    return std::stoull(it->second);
  };
  LabeledImageSet set{kv.count("name") ? kv["name"] : path.stem().string(), num("classes"), num("height"),
                      num("width"), {}, {}};
  std::vector<std::size_t> taken(set.classes, 0);
  append_records(read_file(path), set.image_bytes(), set.classes, path.string(), 0, taken, set);
  if (set.size() != num("count"))
    throw FormatError(path.string() + ": header count " + kv["count"] + " disagrees with " +
                          std::to_string(set.size()) + " records",
                      set.size() * (set.image_bytes() + 1));
  return set;
}

CropPlacement sample_placement(const AugmentSpec& spec, std::size_t height, std::size_t width, std::mt19937_64& rng) {
  const std::size_t crop_h = spec.crop ? spec.crop : height;
  const std::size_t crop_w = spec.crop ? spec.crop : width;
  if (crop_h > height + 2 * spec.pad || crop_w > width + 2 * spec.pad)
    throw std::invalid_argument("crop larger than padded image");
  std::uniform_int_distribution<std::size_t> ys(0, height + 2 * spec.pad - crop_h);
  std::uniform_int_distribution<std::size_t> xs(0, width + 2 * spec.pad - crop_w);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  CropPlacement p;
  p.y = ys(rng);
  p.x = xs(rng);
  p.flip = coin(rng) < spec.hflip_prob;
  return p;
}

std::vector<std::uint8_t> apply_placement(std::span<const std::uint8_t> image, std::size_t height, std::size_t width,
                                          const AugmentSpec& spec, const CropPlacement& where) {
  const std::size_t crop_h = spec.crop ? spec.crop : height;
  const std::size_t crop_w = spec.crop ? spec.crop : width;
  std::vector<std::uint8_t> out(3 * crop_h * crop_w, 0);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t y = 0; y < crop_h; ++y) {
      const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(where.y + y) - static_cast<std::ptrdiff_t>(spec.pad);
      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(height)) continue;
      for (std::size_t x = 0; x < crop_w; ++x) {
        const std::size_t dx = where.flip ? crop_w - 1 - x : x;
        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(where.x + x) - static_cast<std::ptrdiff_t>(spec.pad);
        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(width)) continue;
        out[(ch * crop_h + y) * crop_w + dx] = image[(ch * height + sy) * width + sx];
      }
    }
  return out;
}

std::vector<std::uint8_t> augment(std::span<const std::uint8_t> image, std::size_t height, std::size_t width,
                                  const AugmentSpec& spec, std::mt19937_64& rng) {
  if (!spec.enabled) return {image.begin(), image.end()};
  return apply_placement(image, height, width, spec, sample_placement(spec, height, width, rng));
}

std::pair<int, int> synthetic_band(std::size_t k, std::size_t classes) {
  const int width = std::max(1, 256 / static_cast<int>(2 * classes));
  if (classes <= 1) return {0, width};
  const double step = static_cast<double>(256 - width) / static_cast<double>(classes - 1);
  return {static_cast<int>(std::lround(step * static_cast<double>(k))), width};
}

LabeledImageSet make_synthetic(SyntheticKind kind, std::size_t per_class, std::size_t classes, std::size_t height,
                               std::size_t width, std::uint64_t seed) {
  if (per_class == 0 || classes == 0 || height == 0 || width == 0)
    throw std::invalid_argument("synthetic set parameters must be positive");
  LabeledImageSet set{kind == SyntheticKind::separable ? "synthetic-separable" : "synthetic-striped",
                      classes, height, width, {}, {}};
  std::mt19937_64 rng(seed);
  const std::size_t plane = height * width;
  set.pixels.resize(per_class * classes * 3 * plane);
  std::uniform_int_distribution<int> any(0, 255);
  std::uniform_int_distribution<int> period(1, 4);
  std::size_t i = 0;
  for (std::size_t n = 0; n < per_class; ++n)
    for (std::size_t k = 0; k < classes; ++k, ++i) {
      set.labels.push_back(static_cast<int>(k));
      const auto [start, bw] = synthetic_band(k, classes);
      std::uniform_int_distribution<int> band(start, start + bw - 1);
      std::uint8_t* img = set.pixels.data() + i * 3 * plane;
      if (kind == SyntheticKind::separable) {
        for (std::size_t e = 0; e < 3 * plane; ++e) img[e] = static_cast<std::uint8_t>(band(rng));
        continue;
      }
      const bool vertical = any(rng) & 1;
      const int stripe = period(rng);
      std::array<int, 3> distractor{any(rng), any(rng), any(rng)};
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
          const bool on = ((vertical ? x : y) / static_cast<std::size_t>(stripe)) % 2 == 0;
          for (std::size_t ch = 0; ch < 3; ++ch)
            img[ch * plane + y * width + x] = static_cast<std::uint8_t>(on ? band(rng) : distractor[ch]);
        }
    }
  return set;
}

LabeledImageSet balanced_subset(const LabeledImageSet& set, std::size_t per_class) {
  LabeledImageSet out{set.name, set.classes, set.height, set.width, {}, {}};
  std::vector<std::size_t> taken(set.classes, 0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto l = static_cast<std::size_t>(set.labels[i]);
    if (taken[l] >= per_class) continue;
    ++taken[l];
    out.labels.push_back(set.labels[i]);
    auto img = set.image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
  }
  return out;
}

BatchIterator::BatchIterator(const LabeledImageSet& set, std::size_t batch_size, std::uint64_t seed, bool shuffle)
    : set_(&set), batch_size_(batch_size), shuffle_(shuffle), rng_(seed), order_(set.size()) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
}

void BatchIterator::start_epoch() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle_) std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
  started_ = true;
}

bool BatchIterator::next(Batch& out) {
  if (!started_) start_epoch();
  if (cursor_ >= order_.size()) return false;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  out.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                     order_.begin() + static_cast<std::ptrdiff_t>(end));
  out.images = set_->gather(out.indices);
  out.labels.clear();
  for (std::size_t i : out.indices) out.labels.push_back(set_->labels[i]);
  cursor_ = end;
  return true;
}

std::size_t BatchIterator::batches_per_epoch() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

}  // namespace lvnet
