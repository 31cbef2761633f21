#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sgboost {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient slot.
///
/// Every extent is positive, so `numel() == product(shape)` always holds. The
/// gradient slot, once allocated, has the same length as the data.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool has_grad() const noexcept { return !data_.empty() && grad_.size() == data_.size(); }
  std::span<double> grad();
  std::span<const double> grad() const;
  /// Allocates the gradient slot if needed and fills it with zeros.
  void zero_grad();
  void clear_grad() noexcept { grad_.clear(); }

  /// Same data viewed under another shape with equal element count.
  Tensor reshaped(Shape shape) const;

  /// Returns the `index`-th slice along the leading axis (copy).
  Tensor slice_leading(std::size_t index) const;
  /// Copies rows [begin, end) of the leading axis.
  Tensor slice_leading(std::size_t begin, std::size_t end) const;
  /// Copies the listed leading-axis entries, in order.
  Tensor gather_leading(std::span<const std::size_t> indices) const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

  bool all_finite() const noexcept;

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
};

}  // namespace sgboost
