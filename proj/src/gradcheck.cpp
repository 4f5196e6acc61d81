#include "lvnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lvnet {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& loss, const Tensor& theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  Tensor probe = theta;
  Tensor grad(theta.shape());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const double up = loss(probe);
    probe[i] = theta[i] - h;
    const double down = loss(probe);
    probe[i] = theta[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor) {
  if (analytic.shape() != numeric.shape()) throw ShapeError("max_relative_error", analytic.shape(), numeric.shape());
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

}  // namespace lvnet
