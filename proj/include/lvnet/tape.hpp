#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lvnet/tensor.hpp"

namespace lvnet {

/// Handle to a node on a Tape. Only meaningful for the tape that created it.
struct Var {
  std::size_t id = 0;
};

using GradientMap = std::map<std::string, Tensor>;

class Tape;

/// Backward rule for one node. `grad_inputs[i]` is null when input i does not
/// require a gradient; otherwise it points at a zero-initialized (or partially
/// accumulated) buffer that the rule must add into.
using BackwardFn =
    std::function<void(const Tape& tape, const Tensor& grad_out, std::span<Tensor* const> grad_inputs)>;

/// Counters filled by forward ops, used to cross-check analytic cost models
/// and to place gradient checks away from non-differentiable points.
struct OpCounters {
  /// Multiply-adds performed by each conv2d call, in recording order.
  std::vector<std::uint64_t> conv_macs;
  /// Smallest |x| over relu inputs and smallest gap between the largest and
  /// runner-up entry of any max-pool window. Ties at exactly zero are skipped:
  /// they come from rectified inputs and stay flat under small perturbations.
  double kink_margin = std::numeric_limits<double>::infinity();
};

/// Dynamic reverse-mode graph. Nodes are appended in execution order, so an
/// input id is always smaller than the id of the node consuming it.
class Tape {
 public:
  Var constant(Tensor value);
  /// Differentiable leaf. Gradients are reported under `name`; registering
  /// the same name twice accumulates into one entry.
  Var parameter(std::string name, Tensor value);
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar root. Returns gradients for every registered
  /// parameter (zero where the loss does not depend on it).
  GradientMap backward(Var loss) const;

  OpCounters& counters() { return counters_; }
  const OpCounters& counters() const { return counters_; }

 private:
  struct Node {
    Tensor value;
    std::vector<Var> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::string param_name;
  };
  std::vector<Node> nodes_;
  OpCounters counters_;
};

}  // namespace lvnet
