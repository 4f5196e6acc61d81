#include "lvnet/optim.hpp"

#include <cmath>

namespace lvnet {

void sgd_step(Tensor& param, Tensor& velocity, const Tensor& grad, double lr, double momentum, double decay) {
  if (param.shape() != grad.shape()) throw ShapeError("sgd_step gradient", param.shape(), grad.shape());
  if (param.shape() != velocity.shape()) throw ShapeError("sgd_step velocity", param.shape(), velocity.shape());
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + (grad[i] + decay * param[i]);
    param[i] -= lr * velocity[i];
  }
}

SgdMomentum::SgdMomentum(SgdConfig config) : config_(std::move(config)) {}

double SgdMomentum::learning_rate(std::size_t epoch) const {
  double lr = config_.learning_rate;
  for (std::size_t m : config_.milestones)
    if (epoch >= m) lr /= config_.lr_divisor;
  return lr;
}

void SgdMomentum::step(const std::string& name, Tensor& param, const Tensor& grad, bool is_table) {
  auto it = velocity_.find(name);
  if (it == velocity_.end()) it = velocity_.emplace(name, Tensor(param.shape())).first;
  const double decay = is_table && !config_.decay_tables ? 0.0 : config_.weight_decay;
  sgd_step(param, it->second, grad, learning_rate(epoch_), config_.momentum, decay);
}

void SgdMomentum::step(ParameterStore& params, const GradientMap& grads) {
  for (auto& [name, value] : params) step(name, value, grads.at(name), false);
}

void SgdMomentum::step(LookupTables& tables, const GradientMap& grads) {
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const std::string name(kTableParamNames[ch]);
    step(name, tables.table(ch), grads.at(name), true);
  }
}

}  // namespace lvnet
