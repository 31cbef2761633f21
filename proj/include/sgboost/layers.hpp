#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "sgboost/tensor.hpp"

namespace sgboost {

struct Conv2dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;  // zero padding
};

struct MaxPool2dSpec {
  std::size_t window = 2;
  std::size_t stride = 2;
};

struct ReluSpec {};
struct FlattenSpec {};

struct DenseSpec {
  std::size_t in_features = 1;
  std::size_t out_features = 1;
};

using LayerSpec = std::variant<Conv2dSpec, MaxPool2dSpec, ReluSpec, FlattenSpec, DenseSpec>;

std::string layer_name(const LayerSpec& spec);

/// One layer with its parameters. Conv weights are [out, in, k, k], dense
/// weights are [out, in]; biases are [out]. Parameter-free layers leave both
/// tensors empty.
struct Layer {
  LayerSpec spec;
  Tensor weight;
  Tensor bias;

  bool has_parameters() const noexcept { return !weight.empty(); }
  bool is_dense() const noexcept { return std::holds_alternative<DenseSpec>(spec); }
};

/// Builds a layer with zero-initialized parameters of the right shape.
Layer make_layer(const LayerSpec& spec);

/// Fills weight and bias uniformly in +-1/sqrt(fan_in).
void init_uniform_fan_in(Layer& layer, std::mt19937_64& rng);

/// Per-sample output shape of a layer, throws GeometryError on collapse or
/// channel/width mismatch. `sample_shape` excludes the batch axis.
Shape layer_output_shape(const LayerSpec& spec, const Shape& sample_shape, std::size_t position);

/// Ordered stack of layers. Inputs carry a leading batch axis: [N, C, H, W]
/// for convolutional nets, [N, D] for dense-only nets.
///
/// The layers before `split_index()` form the feature extractor and contain
/// no dense layer; the classifier starts at the first dense layer.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers);

  void add(Layer layer);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  std::size_t size() const noexcept { return layers_.size(); }
  std::size_t split_index() const noexcept;

  /// Copies of the layer ranges [0, split) and [split, end).
  Network feature_extractor() const;
  Network classifier() const;
  /// Feature-extractor layers of `extractor` followed by the classifier layers
  /// of `head`, as independent copies.
  static Network compose(const Network& extractor, const Network& head);

  /// Forward pass that records activations for a later backward().
  Tensor forward(const Tensor& x);
  /// Forward pass without touching the recorded state.
  Tensor infer(const Tensor& x) const;
  /// Forward through layers [0, split_index()) only.
  Tensor extract_features(const Tensor& x) const;

  /// Back-propagates `upstream` (d loss / d output) through the activations
  /// of the most recent forward(). Parameter gradient slots are overwritten.
  /// Returns d loss / d input when `wrt_input` is set.
  std::optional<Tensor> backward(const Tensor& upstream, bool wrt_input = false);
  bool has_forward_state() const noexcept { return !cache_.inputs.empty(); }
  void clear_forward_state() noexcept { cache_ = {}; }

  /// Per-sample output shape for a per-sample input shape (validates geometry).
  Shape output_shape(const Shape& sample_shape) const;
  /// Output shape of the feature-extractor prefix for a per-sample input shape.
  Shape feature_shape(const Shape& sample_shape) const;

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  struct Cache {
    std::vector<Tensor> inputs;  // input of every layer
    std::vector<std::vector<std::size_t>> argmax;  // max-pool winners per layer
  };

  Tensor run(const Tensor& x, std::size_t end, Cache* cache) const;

  std::vector<Layer> layers_;
  Cache cache_;
};

}  // namespace sgboost
