#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lvnet/image.hpp"
#include "lvnet/lookup.hpp"
#include "lvnet/tape.hpp"
#include "lvnet/tensor.hpp"

namespace lvnet {

/// conv(k x k, `filters`, stride, "same" padding k/2) + bias + relu [+ 2x2 max pool].
struct ConvBlock {
  std::size_t kernel = 3;
  std::size_t filters = 8;
  std::size_t stride = 1;
  bool pool = true;
  friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

struct ModelConfig {
  std::size_t input_channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<ConvBlock> blocks{{3, 8, 1, true}};
  /// Hidden dense width before the classifier; 0 connects the features straight to the logits.
  std::size_t head_width = 32;
  std::size_t classes = 10;
  std::uint64_t seed = 0;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Insertion-ordered named tensors.
class ParameterStore {
 public:
  Tensor& add(std::string name, Tensor value);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t scalar_count() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

class Model {
 public:
  /// He fan-in normal weights, zero biases, drawn from `config.seed`.
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }

  /// Records the network on `tape` and returns logits [N, K]. Parameters are
  /// registered under their store names.
  Var forward(Tape& tape, Var input) const;
  Tensor forward(const Tensor& input) const;

 private:
  ModelConfig config_;
  ParameterStore params_;
};

Model build_model(const ModelConfig& config);

struct ChannelStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

enum class StandardizeMode { per_image, dataset };

/// The fixed, hand-designed input coding of a standard network.
struct Standardizer {
  StandardizeMode mode = StandardizeMode::per_image;
  ChannelStats stats;  // used in dataset mode
  bool epsilon_guard = true;
  double epsilon = 1e-8;
};

/// Population mean and standard deviation per channel over `count` planar images.
ChannelStats compute_channel_stats(std::span<const std::uint8_t> pixels, std::size_t count, std::size_t plane);

/// (v - mean) / std with the standard deviation clamped to epsilon when guarded.
double standardized_value(std::uint8_t v, double mean, double stddev, const Standardizer& s);

Tensor standardize(const ImageBatch& images, const Standardizer& s);

/// u = 1 full tables holding t_ch[v] = (v - mean_ch) / std_ch, i.e. the
/// dataset-level standardization expressed as a lookup.
LookupTables standardizing_tables(const Standardizer& s);

/// A model together with its input stage: learned lookup tables when `tables`
/// is set, standardization otherwise.
struct Network {
  Model* model = nullptr;
  LookupTables* tables = nullptr;
  Standardizer standardizer;

  std::size_t parameter_count() const;
};

/// Checks that the model input channels agree with the input stage.
void check_input_stage(const Network& net);

/// Lookup (or standardization) followed by the model. Tables are recorded as
/// trainable parameters unless `train_tables` is false.
Var forward(Tape& tape, const Network& net, const ImageBatch& images, bool train_tables = true);

Tensor predict_logits(const Network& net, const ImageBatch& images);

}  // namespace lvnet
