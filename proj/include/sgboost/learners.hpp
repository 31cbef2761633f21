#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sgboost/batch.hpp"
#include "sgboost/layers.hpp"
#include "sgboost/optim.hpp"
#include "sgboost/subgrid.hpp"

namespace sgboost {

/// Named weak-learner architecture. The feature extractor is fully
/// convolutional/pooling so it accepts any spatial size; the classifier is a
/// single dense layer sized from the extractor output.
struct ArchitectureProfile {
  std::uint32_t id = 0;
  std::string name;
  std::vector<LayerSpec> (*extractor)(std::size_t channels) = nullptr;
};

const std::vector<ArchitectureProfile>& architecture_profiles();
const ArchitectureProfile& find_profile(const std::string& name);
const ArchitectureProfile& find_profile(std::uint32_t id);

enum class LearnerRole : std::uint8_t { basic, additive };

struct WeakLearner {
  Network net;
  Shape geometry;  // C, H_t, W_t
  LearnerRole role = LearnerRole::basic;
  std::uint32_t profile_id = 0;

  std::size_t classifier_width() const;
};

/// Fresh learner for full-size inputs, every parameter drawn from `seed`.
WeakLearner build_basic_learner(const ArchitectureProfile& profile, const Shape& geometry, std::size_t classes,
                                std::uint64_t seed);

/// Copies `prev`'s feature extractor and attaches a freshly initialized dense
/// classifier sized for the sliced geometry defined by `mask`.
WeakLearner warm_start_learner(const WeakLearner& prev, const SubgridMask& mask, std::size_t classes,
                               std::uint64_t seed);

/// Feature extractor of `prev` followed by the classifier of `basic`, as an
/// independent network accepting full-size inputs.
Network build_probe(const WeakLearner& prev, const WeakLearner& basic);

/// Rebuilds the layer stack for a profile/geometry with zero parameters
/// (used when restoring checkpoints).
Network build_architecture(const ArchitectureProfile& profile, const Shape& geometry, std::size_t classes);

enum class LossMode : std::uint8_t { ls_weights, cross_entropy };

struct TrainConfig {
  std::size_t epochs = 15;
  std::size_t batch_size = 64;
  AdamConfig adam;
  LossMode loss = LossMode::ls_weights;
  bool freeze_extractor = false;
  std::uint64_t seed = 0;  // minibatch order
};

struct TrainReport {
  double final_loss = 0.0;
  std::vector<double> epoch_losses;  // mean per-sample loss of each epoch
};

/// Minibatch ADAM on sum_i ||g(x_i) - w_i||^2 (ls_weights) or softmax
/// cross-entropy against the labels. `weights` may be null in cross-entropy
/// mode. The caller keeps `state` and `rng` to continue training later.
TrainReport train_weak_learner(WeakLearner& learner, const LabeledBatch& batch, const BoostWeights* weights,
                               const TrainConfig& config, AdamState& state, std::mt19937_64& rng);

TrainReport train_weak_learner(WeakLearner& learner, const LabeledBatch& batch, const BoostWeights* weights,
                               const TrainConfig& config);

/// Scores of `net` on every sample of `inputs`, evaluated in chunks.
Tensor predict_scores(const Network& net, const Tensor& inputs, std::size_t chunk = 256);

}  // namespace sgboost
