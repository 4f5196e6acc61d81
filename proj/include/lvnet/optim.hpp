#pragma once

#include <map>
#include <string>
#include <vector>

#include "lvnet/lookup.hpp"
#include "lvnet/network.hpp"
#include "lvnet/tape.hpp"

namespace lvnet {

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Tables are inputs rather than weights, so they skip decay unless asked.
  bool decay_tables = false;
  /// The rate is divided by `lr_divisor` at each listed epoch (0-based).
  std::vector<std::size_t> milestones;
  double lr_divisor = 1.0;
};

/// v <- momentum * v + (grad + decay * p);  p <- p - lr * v
void sgd_step(Tensor& param, Tensor& velocity, const Tensor& grad, double lr, double momentum, double decay);

/// SGD with momentum over named parameters. Velocities are created lazily and
/// keyed by parameter name.
class SgdMomentum {
 public:
  explicit SgdMomentum(SgdConfig config = {});

  const SgdConfig& config() const { return config_; }
  double learning_rate(std::size_t epoch) const;
  void set_epoch(std::size_t epoch) { epoch_ = epoch; }

  void step(const std::string& name, Tensor& param, const Tensor& grad, bool is_table);
  void step(ParameterStore& params, const GradientMap& grads);
  void step(LookupTables& tables, const GradientMap& grads);

  std::map<std::string, Tensor>& velocities() { return velocity_; }
  const std::map<std::string, Tensor>& velocities() const { return velocity_; }

 private:
  SgdConfig config_;
  std::size_t epoch_ = 0;
  std::map<std::string, Tensor> velocity_;
};

}  // namespace lvnet
