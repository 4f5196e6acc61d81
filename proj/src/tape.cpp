#include "lvnet/tape.hpp"

#include <stdexcept>

namespace lvnet {

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, {}});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(std::string name, Tensor value) {
  if (name.empty()) throw std::invalid_argument("parameter name must be non-empty");
  nodes_.push_back(Node{std::move(value), {}, {}, true, std::move(name)});
  return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) {
    if (in.id >= nodes_.size()) throw std::out_of_range("tape input refers to a node that does not exist yet");
    needs = needs || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), std::move(inputs), needs ? std::move(backward) : BackwardFn{}, needs, {}});
  return Var{nodes_.size() - 1};
}

GradientMap Tape::backward(Var loss) const {
  const Node& root = nodes_.at(loss.id);
  if (root.value.size() != 1)
    throw std::invalid_argument("backward requires a scalar root, got shape " + to_string(root.value.shape()));

  std::vector<Tensor> grads(loss.id + 1);
  grads[loss.id] = Tensor(root.value.shape(), 1.0);

  GradientMap out;
  for (const Node& n : nodes_)
    if (!n.param_name.empty() && !out.count(n.param_name)) out.emplace(n.param_name, Tensor(n.value.shape()));

  std::vector<Tensor*> slots;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.requires_grad || grads[id].empty()) continue;
    if (!node.param_name.empty()) {
      Tensor& acc = out.at(node.param_name);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += grads[id][i];
      continue;
    }
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      const std::size_t in = node.inputs[i].id;
      if (!nodes_[in].requires_grad) continue;
      if (grads[in].empty()) grads[in] = Tensor(nodes_[in].value.shape());
      slots[i] = &grads[in];
    }
    node.backward(*this, grads[id], slots);
    grads[id] = Tensor();
  }
  return out;
}

}  // namespace lvnet
