#include "sgboost/layers.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "sgboost/error.hpp"

namespace sgboost {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string where(const LayerSpec& spec, std::size_t position) {
  return "layer " + std::to_string(position) + " (" + layer_name(spec) + ")";
}

std::size_t conv_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  const std::size_t padded = in + 2 * padding;
  if (padded < kernel) return 0;
  return (padded - kernel) / stride + 1;
}

// ---- conv2d ---------------------------------------------------------------

// Output positions `o` in [lo, hi) for which o*stride + offset - padding lies in [0, extent).
void valid_range(std::ptrdiff_t extent, std::ptrdiff_t out_extent, std::ptrdiff_t stride, std::ptrdiff_t offset,
                 std::ptrdiff_t padding, std::ptrdiff_t& lo, std::ptrdiff_t& hi) {
  const std::ptrdiff_t shift = offset - padding;
  lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  const std::ptrdiff_t limit = extent - shift;  // need o*stride < limit
  hi = limit <= 0 ? 0 : std::min(out_extent, (limit - 1) / stride + 1);
  if (hi < lo) hi = lo;
}

Tensor conv_forward(const Layer& layer, const Conv2dSpec& s, const Tensor& x) {
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = conv_extent(h, s.kernel, s.stride, s.padding);
  const std::size_t wo = conv_extent(w, s.kernel, s.stride, s.padding);
  const std::size_t co = s.out_channels, k = s.kernel;
  Tensor y({n, co, ho, wo});
  auto out = y.data();
  auto in = x.data();
  auto wt = layer.weight.data();
  auto bias = layer.bias.data();
  const auto stride = static_cast<std::ptrdiff_t>(s.stride);
  const auto pad = static_cast<std::ptrdiff_t>(s.padding);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oc = 0; oc < co; ++oc) {
      double* plane = out.data() + ((b * co + oc) * ho) * wo;
      std::fill(plane, plane + ho * wo, bias[oc]);
      for (std::size_t ic = 0; ic < ci; ++ic) {
        const double* src = in.data() + ((b * ci + ic) * h) * w;
        for (std::size_t kh = 0; kh < k; ++kh) {
          std::ptrdiff_t oh_lo, oh_hi;
          valid_range(static_cast<std::ptrdiff_t>(h), static_cast<std::ptrdiff_t>(ho), stride,
                      static_cast<std::ptrdiff_t>(kh), pad, oh_lo, oh_hi);
          for (std::size_t kw = 0; kw < k; ++kw) {
            const double weight = wt[((oc * ci + ic) * k + kh) * k + kw];
            std::ptrdiff_t ow_lo, ow_hi;
            valid_range(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(wo), stride,
                        static_cast<std::ptrdiff_t>(kw), pad, ow_lo, ow_hi);
            for (std::ptrdiff_t oh = oh_lo; oh < oh_hi; ++oh) {
              const double* row = src + (oh * stride + static_cast<std::ptrdiff_t>(kh) - pad) * static_cast<std::ptrdiff_t>(w);
              double* dst = plane + oh * static_cast<std::ptrdiff_t>(wo);
              const std::ptrdiff_t col0 = static_cast<std::ptrdiff_t>(kw) - pad;
              for (std::ptrdiff_t ow = ow_lo; ow < ow_hi; ++ow) dst[ow] += weight * row[ow * stride + col0];
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor conv_backward(Layer& layer, const Conv2dSpec& s, const Tensor& x, const Tensor& dy, bool need_dx) {
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t co = dy.dim(1), ho = dy.dim(2), wo = dy.dim(3), k = s.kernel;
  auto in = x.data();
  auto g = dy.data();
  auto wt = layer.weight.data();
  auto dw = layer.weight.grad();
  auto db = layer.bias.grad();
  Tensor dx;
  if (need_dx) dx = Tensor(x.shape());
  const auto stride = static_cast<std::ptrdiff_t>(s.stride);
  const auto pad = static_cast<std::ptrdiff_t>(s.padding);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oc = 0; oc < co; ++oc) {
      const double* gplane = g.data() + ((b * co + oc) * ho) * wo;
      double bsum = 0.0;
      for (std::size_t i = 0; i < ho * wo; ++i) bsum += gplane[i];
      db[oc] += bsum;
      for (std::size_t ic = 0; ic < ci; ++ic) {
        const double* src = in.data() + ((b * ci + ic) * h) * w;
        double* dsrc = need_dx ? dx.data().data() + ((b * ci + ic) * h) * w : nullptr;
        for (std::size_t kh = 0; kh < k; ++kh) {
          std::ptrdiff_t oh_lo, oh_hi;
          valid_range(static_cast<std::ptrdiff_t>(h), static_cast<std::ptrdiff_t>(ho), stride,
                      static_cast<std::ptrdiff_t>(kh), pad, oh_lo, oh_hi);
          for (std::size_t kw = 0; kw < k; ++kw) {
            const std::size_t widx = ((oc * ci + ic) * k + kh) * k + kw;
            const double weight = wt[widx];
            std::ptrdiff_t ow_lo, ow_hi;
            valid_range(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(wo), stride,
                        static_cast<std::ptrdiff_t>(kw), pad, ow_lo, ow_hi);
            const std::ptrdiff_t col0 = static_cast<std::ptrdiff_t>(kw) - pad;
            double acc = 0.0;
            for (std::ptrdiff_t oh = oh_lo; oh < oh_hi; ++oh) {
              const std::ptrdiff_t row_off = (oh * stride + static_cast<std::ptrdiff_t>(kh) - pad) * static_cast<std::ptrdiff_t>(w);
              const double* row = src + row_off;
              const double* grow = gplane + oh * static_cast<std::ptrdiff_t>(wo);
              for (std::ptrdiff_t ow = ow_lo; ow < ow_hi; ++ow) acc += grow[ow] * row[ow * stride + col0];
              if (dsrc) {
                double* drow = dsrc + row_off;
                for (std::ptrdiff_t ow = ow_lo; ow < ow_hi; ++ow) drow[ow * stride + col0] += weight * grow[ow];
              }
            }
            dw[widx] += acc;
          }
        }
      }
    }
  }
  return dx;
}

// ---- maxpool2d ------------------------------------------------------------

Tensor pool_forward(const MaxPool2dSpec& s, const Tensor& x, std::vector<std::size_t>* argmax) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = (h - s.window) / s.stride + 1;
  const std::size_t wo = (w - s.window) / s.stride + 1;
  Tensor y({n, c, ho, wo});
  auto in = x.data();
  auto out = y.data();
  if (argmax) argmax->assign(y.numel(), 0);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oh = 0; oh < ho; ++oh) {
      for (std::size_t ow = 0; ow < wo; ++ow, ++o) {
        std::size_t best = base + (oh * s.stride) * w + ow * s.stride;
        for (std::size_t i = 0; i < s.window; ++i) {
          for (std::size_t j = 0; j < s.window; ++j) {
            const std::size_t idx = base + (oh * s.stride + i) * w + ow * s.stride + j;
            if (in[idx] > in[best]) best = idx;  // strict: first maximum wins
          }
        }
        out[o] = in[best];
        if (argmax) (*argmax)[o] = best;
      }
    }
  }
  return y;
}

// ---- dense ----------------------------------------------------------------

Tensor dense_forward(const Layer& layer, const DenseSpec& s, const Tensor& x) {
  const std::size_t n = x.dim(0), d = s.in_features, m = s.out_features;
  Tensor y({n, m});
  auto in = x.data();
  auto out = y.data();
  auto wt = layer.weight.data();
  auto bias = layer.bias.data();
  for (std::size_t b = 0; b < n; ++b) {
    const double* xi = in.data() + b * d;
    for (std::size_t o = 0; o < m; ++o) {
      const double* wo = wt.data() + o * d;
      double acc = bias[o];
      for (std::size_t i = 0; i < d; ++i) acc += wo[i] * xi[i];
      out[b * m + o] = acc;
    }
  }
  return y;
}

Tensor dense_backward(Layer& layer, const DenseSpec& s, const Tensor& x, const Tensor& dy, bool need_dx) {
  const std::size_t n = x.dim(0), d = s.in_features, m = s.out_features;
  auto in = x.data();
  auto g = dy.data();
  auto wt = layer.weight.data();
  auto dw = layer.weight.grad();
  auto db = layer.bias.grad();
  Tensor dx;
  if (need_dx) dx = Tensor(x.shape());
  for (std::size_t b = 0; b < n; ++b) {
    const double* xi = in.data() + b * d;
    for (std::size_t o = 0; o < m; ++o) {
      const double go = g[b * m + o];
      db[o] += go;
      double* dwo = dw.data() + o * d;
      for (std::size_t i = 0; i < d; ++i) dwo[i] += go * xi[i];
      if (need_dx) {
        const double* wo = wt.data() + o * d;
        double* dxi = dx.data().data() + b * d;
        for (std::size_t i = 0; i < d; ++i) dxi[i] += go * wo[i];
      }
    }
  }
  return dx;
}

}  // namespace

std::string layer_name(const LayerSpec& spec) {
  return std::visit(overloaded{[](const Conv2dSpec&) { return std::string("conv2d"); },
                               [](const MaxPool2dSpec&) { return std::string("maxpool2d"); },
                               [](const ReluSpec&) { return std::string("relu"); },
                               [](const FlattenSpec&) { return std::string("flatten"); },
                               [](const DenseSpec&) { return std::string("dense"); }},
                    spec);
}

Layer make_layer(const LayerSpec& spec) {
  Layer layer{spec, {}, {}};
  std::visit(overloaded{[&](const Conv2dSpec& s) {
                          if (s.in_channels == 0 || s.out_channels == 0 || s.kernel == 0 || s.stride == 0)
                            throw GeometryError("conv2d hyperparameters must be positive");
                          layer.weight = Tensor({s.out_channels, s.in_channels, s.kernel, s.kernel});
                          layer.bias = Tensor({s.out_channels});
                        },
                        [&](const DenseSpec& s) {
                          if (s.in_features == 0 || s.out_features == 0)
                            throw GeometryError("dense widths must be positive");
                          layer.weight = Tensor({s.out_features, s.in_features});
                          layer.bias = Tensor({s.out_features});
                        },
                        [&](const MaxPool2dSpec& s) {
                          if (s.window == 0 || s.stride == 0) throw GeometryError("maxpool2d window/stride must be positive");
                        },
                        [](const auto&) {}},
             spec);
  return layer;
}

void init_uniform_fan_in(Layer& layer, std::mt19937_64& rng) {
  if (!layer.has_parameters()) return;
  const std::size_t fan_in = layer.weight.numel() / layer.weight.dim(0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : layer.weight.data()) v = dist(rng);
  for (auto& v : layer.bias.data()) v = dist(rng);
}

Shape layer_output_shape(const LayerSpec& spec, const Shape& in, std::size_t position) {
  auto fail = [&](const std::string& why) -> GeometryError {
    return GeometryError(where(spec, position) + ": " + why + " (input " + shape_to_string(in) + ")");
  };
  return std::visit(
      overloaded{[&](const Conv2dSpec& s) -> Shape {
                   if (in.size() != 3) throw fail("expects C x H x W input");
                   if (in[0] != s.in_channels)
                     throw fail("expects " + std::to_string(s.in_channels) + " channels");
                   const auto ho = conv_extent(in[1], s.kernel, s.stride, s.padding);
                   const auto wo = conv_extent(in[2], s.kernel, s.stride, s.padding);
                   if (ho == 0 || wo == 0) throw fail("spatial extent collapses below the kernel size");
                   return {s.out_channels, ho, wo};
                 },
                 [&](const MaxPool2dSpec& s) -> Shape {
                   if (in.size() != 3) throw fail("expects C x H x W input");
                   if (in[1] < s.window || in[2] < s.window) throw fail("spatial extent smaller than the pooling window");
                   return {in[0], (in[1] - s.window) / s.stride + 1, (in[2] - s.window) / s.stride + 1};
                 },
                 [&](const ReluSpec&) -> Shape { return in; },
                 [&](const FlattenSpec&) -> Shape { return {shape_numel(in)}; },
                 [&](const DenseSpec& s) -> Shape {
                   if (in.size() != 1) throw fail("expects a flat input");
                   if (in[0] != s.in_features)
                     throw fail("expects width " + std::to_string(s.in_features));
                   return {s.out_features};
                 }},
      spec);
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {}

void Network::add(Layer layer) {
  layers_.push_back(std::move(layer));
  cache_ = {};
}

std::size_t Network::split_index() const noexcept {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].is_dense()) return i;
  }
  return layers_.size();
}

Network Network::feature_extractor() const {
  const auto split = static_cast<std::ptrdiff_t>(split_index());
  return Network(std::vector<Layer>(layers_.begin(), layers_.begin() + split));
}

Network Network::classifier() const {
  const auto split = static_cast<std::ptrdiff_t>(split_index());
  return Network(std::vector<Layer>(layers_.begin() + split, layers_.end()));
}

Network Network::compose(const Network& extractor, const Network& head) {
  std::vector<Layer> layers;
  const auto es = static_cast<std::ptrdiff_t>(extractor.split_index());
  const auto hs = static_cast<std::ptrdiff_t>(head.split_index());
  layers.insert(layers.end(), extractor.layers_.begin(), extractor.layers_.begin() + es);
  layers.insert(layers.end(), head.layers_.begin() + hs, head.layers_.end());
  return Network(std::move(layers));
}

Shape Network::output_shape(const Shape& sample_shape) const {
  Shape s = sample_shape;
  for (std::size_t i = 0; i < layers_.size(); ++i) s = layer_output_shape(layers_[i].spec, s, i);
  return s;
}

Shape Network::feature_shape(const Shape& sample_shape) const {
  Shape s = sample_shape;
  const auto split = split_index();
  for (std::size_t i = 0; i < split; ++i) s = layer_output_shape(layers_[i].spec, s, i);
  return s;
}

Tensor Network::run(const Tensor& x, std::size_t end, Cache* cache) const {
  if (x.rank() < 2) throw GeometryError("network input needs a leading batch axis, got " + shape_to_string(x.shape()));
  const std::size_t batch = x.dim(0);
  Shape sample(x.shape().begin() + 1, x.shape().end());
  if (cache) {
    cache->inputs.clear();
    cache->argmax.assign(end, {});
  }
  Tensor current = x;
  for (std::size_t i = 0; i < end; ++i) {
    const Layer& layer = layers_[i];
    Shape next_sample = layer_output_shape(layer.spec, sample, i);
    Shape next = next_sample;
    next.insert(next.begin(), batch);
    Tensor out = std::visit(
        overloaded{[&](const Conv2dSpec& s) { return conv_forward(layer, s, current); },
                   [&](const MaxPool2dSpec& s) {
                     return pool_forward(s, current, cache ? &cache->argmax[i] : nullptr);
                   },
                   [&](const ReluSpec&) {
                     Tensor y = current;
                     for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
                     return y;
                   },
                   [&](const FlattenSpec&) { return current.reshaped(next); },
                   [&](const DenseSpec& s) { return dense_forward(layer, s, current); }},
        layer.spec);
    if (cache) cache->inputs.push_back(std::move(current));
    current = std::move(out);
    sample = std::move(next_sample);
  }
  return current;
}

Tensor Network::forward(const Tensor& x) { return run(x, layers_.size(), &cache_); }

Tensor Network::infer(const Tensor& x) const { return run(x, layers_.size(), nullptr); }

Tensor Network::extract_features(const Tensor& x) const { return run(x, split_index(), nullptr); }

std::optional<Tensor> Network::backward(const Tensor& upstream, bool wrt_input) {
  if (cache_.inputs.size() != layers_.size() || layers_.empty()) {
    throw StateError("backward called without a preceding forward pass");
  }
  Shape expected = cache_.inputs.front().shape();
  {
    Shape sample(expected.begin() + 1, expected.end());
    Shape out = output_shape(sample);
    out.insert(out.begin(), expected[0]);
    if (upstream.shape() != out) {
      throw GeometryError("upstream gradient shape " + shape_to_string(upstream.shape()) +
                          " does not match network output " + shape_to_string(out));
    }
  }
  for (auto& layer : layers_) {
    if (layer.has_parameters()) {
      layer.weight.zero_grad();
      layer.bias.zero_grad();
    }
  }
  Tensor grad = upstream;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    Layer& layer = layers_[idx];
    const Tensor& x = cache_.inputs[idx];
    const bool need_dx = idx > 0 || wrt_input;
    grad = std::visit(
        overloaded{[&](const Conv2dSpec& s) { return conv_backward(layer, s, x, grad, need_dx); },
                   [&](const MaxPool2dSpec&) {
                     Tensor dx(x.shape());
                     const auto& winners = cache_.argmax[idx];
                     auto g = grad.data();
                     auto d = dx.data();
                     for (std::size_t o = 0; o < winners.size(); ++o) d[winners[o]] += g[o];
                     return dx;
                   },
                   [&](const ReluSpec&) {
                     Tensor dx = grad;
                     auto in = x.data();
                     auto d = dx.data();
                     for (std::size_t i = 0; i < d.size(); ++i) d[i] = in[i] > 0.0 ? d[i] : 0.0;
                     return dx;
                   },
                   [&](const FlattenSpec&) { return grad.reshaped(x.shape()); },
                   [&](const DenseSpec& s) { return dense_backward(layer, s, x, grad, need_dx); }},
        layer.spec);
  }
  if (!wrt_input) return std::nullopt;
  return grad;
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (auto& layer : layers_) {
    if (layer.has_parameters()) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
  return out;
}

std::vector<const Tensor*> Network::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& layer : layers_) {
    if (layer.has_parameters()) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto* p : parameters()) total += p->numel();
  return total;
}

void Network::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

}  // namespace sgboost
