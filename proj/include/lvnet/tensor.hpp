#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lvnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& what, const Shape& lhs, const Shape& rhs);
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace lvnet
