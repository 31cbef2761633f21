#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sgboost/tensor.hpp"

namespace sgboost {

/// Samples stored contiguously as [N, C, H, W] with 1-based labels in 1..M.
struct LabeledBatch {
  Tensor inputs;
  std::vector<int> labels;
  std::size_t classes = 0;
  bool normalized = false;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t channels() const { return inputs.dim(1); }
  std::size_t height() const { return inputs.dim(2); }
  std::size_t width() const { return inputs.dim(3); }
  Shape sample_shape() const { return {channels(), height(), width()}; }
  Tensor sample(std::size_t i) const { return inputs.slice_leading(i); }

  /// Copies the listed samples into a new batch.
  LabeledBatch subset(std::span<const std::size_t> indices) const;
  /// Throws on inconsistent counts, rank or labels outside 1..classes.
  void validate() const;
};

/// Per-sample boosting weight vectors, [N, M].
struct BoostWeights {
  Tensor values;

  std::size_t size() const { return values.dim(0); }
  std::size_t classes() const { return values.dim(1); }
  std::span<const double> row(std::size_t i) const {
    return values.data().subspan(i * classes(), classes());
  }
};

}  // namespace sgboost
