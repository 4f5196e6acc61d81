#include "lvnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "lvnet/ops.hpp"

namespace lvnet {
namespace {

std::string conv_name(std::size_t i, const char* what) { return "conv" + std::to_string(i) + "." + what; }
std::string fc_name(std::size_t i, const char* what) { return "fc" + std::to_string(i) + "." + what; }

Tensor he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

Tensor& ParameterStore::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  entries_.emplace_back(std::move(name), std::move(value));
  return entries_.back().second;
}

Tensor& ParameterStore::at(const std::string& name) {
  for (auto& [n, t] : entries_)
    if (n == name) return t;
  throw std::out_of_range("unknown parameter " + name);
}

const Tensor& ParameterStore::at(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  if (config_.input_channels == 0 || config_.classes == 0 || config_.height == 0 || config_.width == 0)
    throw std::invalid_argument("model config needs positive input channels, classes and image size");
  std::mt19937_64 rng(config_.seed);
  std::size_t channels = config_.input_channels, h = config_.height, w = config_.width;
  for (std::size_t i = 0; i < config_.blocks.size(); ++i) {
    const ConvBlock& b = config_.blocks[i];
    if (b.kernel == 0 || b.filters == 0 || b.stride == 0)
      throw std::invalid_argument("conv block " + std::to_string(i) + " needs positive kernel, filters and stride");
    const std::size_t fan_in = channels * b.kernel * b.kernel;
    params_.add(conv_name(i, "weight"), he_normal({b.filters, channels, b.kernel, b.kernel}, fan_in, rng));
    params_.add(conv_name(i, "bias"), Tensor({b.filters}));
    h = conv_output_extent(h, b.kernel, b.stride, b.kernel / 2);
    w = conv_output_extent(w, b.kernel, b.stride, b.kernel / 2);
    if (b.pool) {
      if (h < 2 || w < 2)
        throw std::invalid_argument("conv block " + std::to_string(i) + " pools a " + std::to_string(h) + "x" +
                                    std::to_string(w) + " map below 1x1");
      h /= 2;
      w /= 2;
    }
    channels = b.filters;
  }
  const std::size_t features = channels * h * w;
  if (config_.head_width > 0) {
    params_.add(fc_name(0, "weight"), he_normal({features, config_.head_width}, features, rng));
    params_.add(fc_name(0, "bias"), Tensor({config_.head_width}));
    params_.add(fc_name(1, "weight"), he_normal({config_.head_width, config_.classes}, config_.head_width, rng));
    params_.add(fc_name(1, "bias"), Tensor({config_.classes}));
  } else {
    params_.add(fc_name(1, "weight"), he_normal({features, config_.classes}, features, rng));
    params_.add(fc_name(1, "bias"), Tensor({config_.classes}));
  }
}

Model build_model(const ModelConfig& config) { return Model(config); }

Var Model::forward(Tape& tape, Var input) const {
  const Tensor& x = tape.value(input);
  if (x.rank() != 4 || x.dim(1) != config_.input_channels)
    throw ShapeError("model input", x.shape(), Shape{0, config_.input_channels, config_.height, config_.width});
  auto p = [&](const std::string& name) { return tape.parameter(name, params_.at(name)); };
  Var h = input;
  for (std::size_t i = 0; i < config_.blocks.size(); ++i) {
    const ConvBlock& b = config_.blocks[i];
    h = conv2d(tape, h, p(conv_name(i, "weight")), {b.stride, b.kernel / 2});
    h = add_channel_bias(tape, h, p(conv_name(i, "bias")));
    h = relu(tape, h);
    if (b.pool) h = max_pool2d(tape, h, 2, 2);
  }
  h = flatten(tape, h);
  if (config_.head_width > 0) h = relu(tape, dense(tape, h, p(fc_name(0, "weight")), p(fc_name(0, "bias"))));
  return dense(tape, h, p(fc_name(1, "weight")), p(fc_name(1, "bias")));
}

Tensor Model::forward(const Tensor& input) const {
  Tape tape;
  return tape.value(forward(tape, tape.constant(input)));
}

ChannelStats compute_channel_stats(std::span<const std::uint8_t> pixels, std::size_t count, std::size_t plane) {
  if (count == 0 || plane == 0 || pixels.size() != count * 3 * plane)
    throw std::invalid_argument("channel stats: pixel buffer does not match image count");
  ChannelStats s;
  const double n = static_cast<double>(count * plane);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t p = 0; p < plane; ++p) total += pixels[(i * 3 + ch) * plane + p];
    const double mean = total / n;
    double sq = 0.0;
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = pixels[(i * 3 + ch) * plane + p] - mean;
        sq += d * d;
      }
    s.mean[ch] = mean;
    s.stddev[ch] = std::sqrt(sq / n);
  }
  return s;
}

double standardized_value(std::uint8_t v, double mean, double stddev, const Standardizer& s) {
  double sd = stddev;
  if (s.epsilon_guard) {
    sd = std::max(sd, s.epsilon);
  } else if (!(sd > 0.0)) {
    throw std::domain_error("standardize: zero standard deviation");
  }
  return (static_cast<double>(v) - mean) / sd;
}

Tensor standardize(const ImageBatch& images, const Standardizer& s) {
  const std::size_t plane = images.height * images.width;
  Tensor out({images.count, 3, images.height, images.width});
  for (std::size_t i = 0; i < images.count; ++i) {
    const auto img = images.image(i);
    const ChannelStats stats = s.mode == StandardizeMode::per_image ? compute_channel_stats(img, 1, plane) : s.stats;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      if (!std::isfinite(stats.mean[ch]) || !std::isfinite(stats.stddev[ch]))
        throw std::domain_error("standardize: non-finite channel statistics");
      double* dst = out.ptr() + (i * 3 + ch) * plane;
      for (std::size_t p = 0; p < plane; ++p)
        dst[p] = standardized_value(img[ch * plane + p], stats.mean[ch], stats.stddev[ch], s);
    }
  }
  return out;
}

LookupTables standardizing_tables(const Standardizer& s) {
  std::array<Tensor, 3> t;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    t[ch] = Tensor({kColorLevels, 1});
    for (int v = 0; v < kColorLevels; ++v)
      t[ch][v] = standardized_value(static_cast<std::uint8_t>(v), s.stats.mean[ch], s.stats.stddev[ch], s);
  }
  return LookupTables::from_tables(TableKind::full, 1, std::move(t));
}

std::size_t Network::parameter_count() const {
  return (model ? model->parameter_count() : 0) + (tables ? tables->parameter_count() : 0);
}

void check_input_stage(const Network& net) {
  if (!net.model) throw std::invalid_argument("network has no model");
  const std::size_t expected = net.tables ? net.tables->output_channels() : 3;
  if (net.model->config().input_channels != expected)
    throw std::invalid_argument("model expects " + std::to_string(net.model->config().input_channels) +
                                " input channels but the input stage produces " + std::to_string(expected));
}

Var forward(Tape& tape, const Network& net, const ImageBatch& images, bool train_tables) {
  check_input_stage(net);
  Var input = net.tables ? lookup(tape, images, *net.tables, train_tables)
                         : tape.constant(standardize(images, net.standardizer));
  return net.model->forward(tape, input);
}

Tensor predict_logits(const Network& net, const ImageBatch& images) {
  Tape tape;
  return tape.value(forward(tape, net, images, false));
}

}  // namespace lvnet
