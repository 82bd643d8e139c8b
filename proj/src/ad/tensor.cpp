// SPDX-License-Identifier: Apache-2.0
#include "mvgb/ad/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace mvgb::ad {

std::size_t shape_size(const Shape &shape) {
  std::size_t n = 1;
  for (auto d : shape)
    n *= d;
  return n;
}

std::string to_string(const Shape &shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i)
      os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1)
    os << ',';
  os << ')';
  return os.str();
}

static void check_extents(const Shape &shape) {
  for (auto d : shape)
    if (d == 0)
      throw ShapeError("tensor: zero extent in shape " + to_string(shape));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  check_extents(shape_);
  if (data_.size() != shape_size(shape_))
    throw ShapeError("tensor: " + std::to_string(data_.size()) + " values for shape " +
                     to_string(shape_));
}

double Tensor::item() const {
  if (data_.size() != 1)
    throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a scalar");
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size())
    throw ShapeError("reshape: cannot view " + to_string(shape_) + " as " + to_string(shape));
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor &Tensor::operator+=(const Tensor &other) {
  if (other.data_.size() != data_.size())
    throw ShapeError("accumulate: " + to_string(shape_) + " += " + to_string(other.shape_));
  for (std::size_t i = 0; i < data_.size(); ++i)
    data_[i] += other.data_[i];
  return *this;
}

} // namespace mvgb::ad
