#include "lvnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace lvnet {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

ShapeError::ShapeError(const std::string& what, const Shape& lhs, const Shape& rhs)
    : std::invalid_argument(what + ": shape mismatch " + to_string(lhs) + " vs " + to_string(rhs)) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive, got " + to_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_))
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + to_string(shape_));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) throw ShapeError("reshape", shape_, shape);
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff", a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace lvnet
