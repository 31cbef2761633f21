#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgboost/tensor.hpp"

namespace sgboost {

struct AdamConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// ADAM with decoupled weight decay: each step shrinks the parameter by
/// lr * weight_decay before applying the bias-corrected moment update.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  /// Updates `params` in place from their gradient slots. Moment buffers are
  /// allocated on the first call and bound to the parameter shapes.
  void step(std::span<Tensor* const> params);

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return step_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

inline void adam_step(AdamState& state, std::span<Tensor* const> params) { state.step(params); }

}  // namespace sgboost
