#pragma once

#include <span>

#include "sgboost/tensor.hpp"

namespace sgboost {

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d value / d pred, same shape as pred
};

/// Sum of squared differences over all entries; gradient 2 (pred - target).
LossResult mse_loss(const Tensor& pred, const Tensor& target);

/// Summed softmax cross-entropy of [N, M] logits against 1-based labels.
LossResult cross_entropy_loss(const Tensor& logits, std::span<const int> labels);

}  // namespace sgboost
