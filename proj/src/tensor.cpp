#include "sgboost/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "sgboost/error.hpp"

namespace sgboost {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw GeometryError("tensor shape must have at least one axis");
  for (auto extent : shape) {
    if (extent == 0) throw GeometryError("tensor extent must be positive, got " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  check_extents(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw GeometryError("tensor of shape " + shape_to_string(shape_) + " needs " +
                        std::to_string(shape_numel(shape_)) + " values, got " + std::to_string(data_.size()));
  }
}

std::span<double> Tensor::grad() {
  if (!has_grad()) throw StateError("gradient slot not populated");
  return grad_;
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw StateError("gradient slot not populated");
  return grad_;
}

void Tensor::zero_grad() { grad_.assign(data_.size(), 0.0); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw GeometryError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice_leading(std::size_t index) const {
  if (index >= shape_.at(0)) throw GeometryError("leading index out of range");
  Shape inner(shape_.begin() + 1, shape_.end());
  if (inner.empty()) inner = {1};
  const std::size_t stride = numel() / shape_[0];
  std::vector<double> values(data_.begin() + static_cast<std::ptrdiff_t>(index * stride),
                             data_.begin() + static_cast<std::ptrdiff_t>((index + 1) * stride));
  return Tensor(std::move(inner), std::move(values));
}

Tensor Tensor::slice_leading(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > shape_.at(0)) throw GeometryError("leading range out of bounds");
  Shape out = shape_;
  out[0] = end - begin;
  const std::size_t stride = numel() / shape_[0];
  std::vector<double> values(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                             data_.begin() + static_cast<std::ptrdiff_t>(end * stride));
  return Tensor(std::move(out), std::move(values));
}

Tensor Tensor::gather_leading(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw GeometryError("cannot gather zero entries");
  Shape out = shape_;
  out[0] = indices.size();
  const std::size_t stride = numel() / shape_[0];
  std::vector<double> values;
  values.reserve(indices.size() * stride);
  for (auto idx : indices) {
    if (idx >= shape_[0]) throw GeometryError("gather index out of range");
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(idx * stride);
    values.insert(values.end(), first, first + static_cast<std::ptrdiff_t>(stride));
  }
  return Tensor(std::move(out), std::move(values));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace sgboost
