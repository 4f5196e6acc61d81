#pragma once

#include <functional>

#include "lvnet/tensor.hpp"

namespace lvnet {

/// Central differences (L(theta + h e_i) - L(theta - h e_i)) / 2h for every coordinate.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& loss, const Tensor& theta, double h = 1e-5);

/// Largest |a - b| / max(|a|, |b|, floor) over all coordinates. The floor keeps
/// coordinates whose true gradient is ~0 from dividing roundoff by roundoff.
double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-6);

}  // namespace lvnet
