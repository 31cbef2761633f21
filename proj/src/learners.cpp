#include "sgboost/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgboost/error.hpp"
#include "sgboost/loss.hpp"

namespace sgboost {

namespace {

std::vector<LayerSpec> linear_extractor(std::size_t) { return {FlattenSpec{}}; }

std::vector<LayerSpec> tiny_two_conv(std::size_t channels) {
  return {Conv2dSpec{channels, 8, 3, 1, 1}, ReluSpec{}, MaxPool2dSpec{2, 2},
          Conv2dSpec{8, 16, 3, 1, 1},       ReluSpec{}, MaxPool2dSpec{2, 2},
          FlattenSpec{}};
}

std::vector<LayerSpec> small_three_conv(std::size_t channels) {
  return {Conv2dSpec{channels, 8, 3, 1, 1}, ReluSpec{}, Conv2dSpec{8, 16, 3, 1, 1}, ReluSpec{},
          MaxPool2dSpec{2, 2},              Conv2dSpec{16, 32, 3, 1, 1}, ReluSpec{}, MaxPool2dSpec{2, 2},
          FlattenSpec{}};
}

Network extractor_network(const ArchitectureProfile& profile, std::size_t channels) {
  Network net;
  for (const auto& spec : profile.extractor(channels)) net.add(make_layer(spec));
  return net;
}

// Attaches a dense head sized for `geometry` to an extractor-only network.
void attach_classifier(Network& net, const Shape& geometry, std::size_t classes, std::mt19937_64* rng) {
  const Shape features = net.feature_shape(geometry);
  if (features.size() != 1) throw GeometryError("feature extractor must end with a flatten layer");
  Layer head = make_layer(DenseSpec{features[0], classes});
  if (rng) init_uniform_fan_in(head, *rng);
  net.add(std::move(head));
}

void check_geometry(const Shape& geometry) {
  if (geometry.size() != 3) throw GeometryError("learner geometry must be C x H x W");
}

}  // namespace

const std::vector<ArchitectureProfile>& architecture_profiles() {
  static const std::vector<ArchitectureProfile> profiles = {
      {0, "linear", &linear_extractor},
      {1, "tiny-cnn-2conv", &tiny_two_conv},
      {2, "small-cnn-3conv", &small_three_conv},
  };
  return profiles;
}

const ArchitectureProfile& find_profile(const std::string& name) {
  for (const auto& p : architecture_profiles()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown architecture profile '" + name + "'");
}

const ArchitectureProfile& find_profile(std::uint32_t id) {
  for (const auto& p : architecture_profiles()) {
    if (p.id == id) return p;
  }
  throw FormatError("unknown architecture profile id " + std::to_string(id));
}

std::size_t WeakLearner::classifier_width() const {
  const auto& layers = net.layers();
  const auto split = net.split_index();
  if (split >= layers.size()) throw GeometryError("learner has no classifier");
  return std::get<DenseSpec>(layers[split].spec).in_features;
}

Network build_architecture(const ArchitectureProfile& profile, const Shape& geometry, std::size_t classes) {
  check_geometry(geometry);
  Network net = extractor_network(profile, geometry[0]);
  attach_classifier(net, geometry, classes, nullptr);
  return net;
}

WeakLearner build_basic_learner(const ArchitectureProfile& profile, const Shape& geometry, std::size_t classes,
                                std::uint64_t seed) {
  check_geometry(geometry);
  if (classes < 2) throw ConfigError("need at least two classes");
  std::mt19937_64 rng(seed);
  Network net = extractor_network(profile, geometry[0]);
  for (auto& layer : net.layers()) init_uniform_fan_in(layer, rng);
  attach_classifier(net, geometry, classes, &rng);
  return WeakLearner{std::move(net), geometry, LearnerRole::basic, profile.id};
}

WeakLearner warm_start_learner(const WeakLearner& prev, const SubgridMask& mask, std::size_t classes,
                               std::uint64_t seed) {
  check_geometry(prev.geometry);
  const Shape geometry{prev.geometry[0], mask.rows.size(), mask.cols.size()};
  if (mask.rows.empty() || mask.cols.empty()) throw GeometryError("warm start needs a nonempty subgrid");
  std::mt19937_64 rng(seed);
  Network net = prev.net.feature_extractor();
  attach_classifier(net, geometry, classes, &rng);
  return WeakLearner{std::move(net), geometry, LearnerRole::additive, prev.profile_id};
}

Network build_probe(const WeakLearner& prev, const WeakLearner& basic) {
  Network probe = Network::compose(prev.net, basic.net);
  const Shape features = prev.net.feature_shape(basic.geometry);
  const std::size_t expected = basic.classifier_width();
  if (features.size() != 1 || features[0] != expected) {
    throw GeometryError("probe: extractor yields " + shape_to_string(features) + " features on full-size input, " +
                        "basic classifier expects " + std::to_string(expected));
  }
  probe.clear_forward_state();
  return probe;
}

Tensor predict_scores(const Network& net, const Tensor& inputs, std::size_t chunk) {
  const std::size_t n = inputs.dim(0);
  chunk = std::max<std::size_t>(chunk, 1);
  std::vector<double> values;
  std::size_t width = 0;
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    Tensor out = net.infer(inputs.slice_leading(begin, end));
    width = out.dim(1);
    values.insert(values.end(), out.data().begin(), out.data().end());
  }
  return Tensor({n, width}, std::move(values));
}

TrainReport train_weak_learner(WeakLearner& learner, const LabeledBatch& batch, const BoostWeights* weights,
                               const TrainConfig& config, AdamState& state, std::mt19937_64& rng) {
  batch.validate();
  if (batch.sample_shape() != learner.geometry) {
    throw GeometryError("training batch " + shape_to_string(batch.sample_shape()) + " does not match learner geometry " +
                        shape_to_string(learner.geometry));
  }
  if (config.loss == LossMode::ls_weights) {
    if (!weights) throw StateError("least-squares training needs boosting weights");
    if (weights->size() != batch.size()) throw GeometryError("weight count does not match batch size");
  }
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");

  std::vector<Tensor*> trainable = learner.net.parameters();
  if (config.freeze_extractor) {
    trainable.clear();
    auto& layers = learner.net.layers();
    for (std::size_t i = learner.net.split_index(); i < layers.size(); ++i) {
      if (layers[i].has_parameters()) {
        trainable.push_back(&layers[i].weight);
        trainable.push_back(&layers[i].bias);
      }
    }
  }

  const std::size_t n = batch.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainReport report;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      Tensor x = batch.inputs.gather_leading(idx);
      Tensor out = learner.net.forward(x);
      LossResult loss;
      if (config.loss == LossMode::ls_weights) {
        loss = mse_loss(out, weights->values.gather_leading(idx));
      } else {
        std::vector<int> labels;
        labels.reserve(idx.size());
        for (auto i : idx) labels.push_back(batch.labels[i]);
        loss = cross_entropy_loss(out, labels);
      }
      if (!std::isfinite(loss.value)) {
        throw NumericError("weak-learner training diverged (non-finite loss) at epoch " + std::to_string(epoch + 1));
      }
      total += loss.value;
      learner.net.backward(loss.grad, false);
      state.step(trainable);
    }
    report.epoch_losses.push_back(total / static_cast<double>(n));
  }
  learner.net.clear_forward_state();
  report.final_loss = report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back();
  return report;
}

TrainReport train_weak_learner(WeakLearner& learner, const LabeledBatch& batch, const BoostWeights* weights,
                               const TrainConfig& config) {
  AdamState state(config.adam);
  std::mt19937_64 rng(config.seed);
  return train_weak_learner(learner, batch, weights, config, state, rng);
}

}  // namespace sgboost
