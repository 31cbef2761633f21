#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sgboost/error.hpp"
#include "sgboost/layers.hpp"
#include "sgboost/tensor.hpp"

using namespace sgboost;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

double weighted_sum(const Tensor& out, const Tensor& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) s += out[i] * c[i];
  return s;
}

bool close(double analytic, double numeric) {
  return std::abs(analytic - numeric) <= 1e-4 * std::max(std::abs(analytic), std::abs(numeric)) + 1e-8;
}

// Checks every parameter and input gradient of sum(c * net(x)) against
// central differences with h = 1e-5.
void check_gradients(Network net, const Tensor& x, std::mt19937_64& rng) {
  const Tensor out = net.forward(x);
  const Tensor c = random_tensor(out.shape(), rng);
  const Tensor dx = *net.backward(c, true);
  const double h = 1e-5;

  for (std::size_t li = 0; li < net.size(); ++li) {
    for (Tensor* p : {&net.layers()[li].weight, &net.layers()[li].bias}) {
      if (p->empty()) continue;
      const std::vector<double> analytic(p->grad().begin(), p->grad().end());
      for (std::size_t i = 0; i < p->numel(); ++i) {
        const double keep = (*p)[i];
        (*p)[i] = keep + h;
        const double up = weighted_sum(net.infer(x), c);
        (*p)[i] = keep - h;
        const double down = weighted_sum(net.infer(x), c);
        (*p)[i] = keep;
        const double numeric = (up - down) / (2 * h);
        EXPECT_TRUE(close(analytic[i], numeric))
            << "layer " << li << " param " << i << ": " << analytic[i] << " vs " << numeric;
      }
    }
  }
  Tensor xp = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    xp[i] = x[i] + h;
    const double up = weighted_sum(net.infer(xp), c);
    xp[i] = x[i] - h;
    const double down = weighted_sum(net.infer(xp), c);
    xp[i] = x[i];
    EXPECT_TRUE(close(dx[i], (up - down) / (2 * h))) << "input " << i;
  }
}

Network random_net(const std::vector<LayerSpec>& specs, std::mt19937_64& rng) {
  Network net;
  for (const auto& s : specs) {
    Layer l = make_layer(s);
    init_uniform_fan_in(l, rng);
    net.add(std::move(l));
  }
  return net;
}

}  // namespace

TEST(Tensor, ShapeAndFill) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_DOUBLE_EQ(t[5], 1.5);
  EXPECT_FALSE(t.has_grad());
  EXPECT_THROW(t.grad(), StateError);
  t.zero_grad();
  EXPECT_TRUE(t.has_grad());
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor({2, 0}), GeometryError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), GeometryError);
  EXPECT_THROW(Tensor({2, 2}).reshaped({3}), GeometryError);
}

TEST(Tensor, LeadingSlices) {
  Tensor t({3, 2}, std::vector<double>{0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.slice_leading(1).values(), (std::vector<double>{2, 3}));
  EXPECT_EQ(t.slice_leading(1, 3).shape(), (Shape{2, 2}));
  const std::vector<std::size_t> idx{2, 0};
  EXPECT_EQ(t.gather_leading(idx).values(), (std::vector<double>{4, 5, 0, 1}));
}

TEST(Forward, IdentityDense) {
  Layer d = make_layer(DenseSpec{2, 2});
  d.weight[0] = 1.0;
  d.weight[3] = 1.0;
  Network net({d});
  const Tensor y = net.infer(Tensor({1, 2}, std::vector<double>{1, 2}));
  EXPECT_EQ(y.values(), (std::vector<double>{1, 2}));
}

TEST(Forward, OneByOneConvScales) {
  Layer c = make_layer(Conv2dSpec{1, 1, 1, 1, 0});
  c.weight[0] = 2.0;
  Network net({c});
  const Tensor y = net.infer(Tensor({1, 1, 2, 2}, 1.0));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (double v : y.values()) EXPECT_EQ(v, 2.0);
}

TEST(Forward, MatchesDirectOracle) {
  std::mt19937_64 rng(7);
  const std::size_t n = 2, ci = 2, co = 3, h = 5, w = 4, k = 3, pad = 1, m = 4;
  Network net = random_net({Conv2dSpec{ci, co, k, 1, pad}, FlattenSpec{}, DenseSpec{co * h * w, m}}, rng);
  const Tensor x = random_tensor({n, ci, h, w}, rng);
  const Tensor y = net.infer(x);

  const Tensor& cw = net.layers()[0].weight;
  const Tensor& cb = net.layers()[0].bias;
  const Tensor& dw = net.layers()[2].weight;
  const Tensor& db = net.layers()[2].bias;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> feat(co * h * w);
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          double acc = cb[o];
          for (std::size_t i = 0; i < ci; ++i)
            for (std::size_t a = 0; a < k; ++a)
              for (std::size_t b = 0; b < k; ++b) {
                const long rr = long(r) + long(a) - long(pad), cc = long(c) + long(b) - long(pad);
                if (rr < 0 || cc < 0 || rr >= long(h) || cc >= long(w)) continue;
                acc += cw[((o * ci + i) * k + a) * k + b] * x[((s * ci + i) * h + rr) * w + cc];
              }
          feat[(o * h + r) * w + c] = acc;
        }
    for (std::size_t j = 0; j < m; ++j) {
      double acc = db[j];
      for (std::size_t f = 0; f < feat.size(); ++f) acc += dw[j * feat.size() + f] * feat[f];
      EXPECT_NEAR(y[s * m + j], acc, 1e-12);
    }
  }
}

TEST(Forward, StridedConvAndPoolShapes) {
  EXPECT_EQ(layer_output_shape(Conv2dSpec{3, 4, 3, 2, 1}, {3, 9, 8}, 0), (Shape{4, 5, 4}));
  EXPECT_EQ(layer_output_shape(MaxPool2dSpec{2, 2}, {4, 5, 4}, 1), (Shape{4, 2, 2}));
  EXPECT_THROW(layer_output_shape(Conv2dSpec{3, 4, 5, 1, 0}, {3, 3, 3}, 0), GeometryError);
  EXPECT_THROW(layer_output_shape(Conv2dSpec{2, 4, 3, 1, 0}, {3, 5, 5}, 0), GeometryError);
  EXPECT_THROW(layer_output_shape(DenseSpec{10, 2}, {3, 2, 2}, 0), GeometryError);
}

TEST(Forward, DeterministicAcrossCalls) {
  std::mt19937_64 rng(3);
  Network net = random_net({Conv2dSpec{1, 2, 3, 1, 1}, ReluSpec{}, MaxPool2dSpec{}, FlattenSpec{}, DenseSpec{8, 3}}, rng);
  const Tensor x = random_tensor({4, 1, 4, 4}, rng);
  EXPECT_EQ(net.infer(x), net.infer(x));
  EXPECT_EQ(net.forward(x), net.infer(x));
}

TEST(Backward, IdentityDenseInputGradientIsOnes) {
  Layer d = make_layer(DenseSpec{3, 3});
  for (std::size_t i = 0; i < 3; ++i) d.weight[i * 3 + i] = 1.0;
  Network net({d});
  net.forward(Tensor({1, 3}, std::vector<double>{0.3, -2, 5}));
  const Tensor dx = *net.backward(Tensor({1, 3}, 1.0), true);
  for (double v : dx.values()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, RequiresForward) {
  Network net({make_layer(DenseSpec{2, 2})});
  EXPECT_THROW(net.backward(Tensor({1, 2}, 1.0)), StateError);
}

TEST(Backward, MaxPoolGradientOnlyAtArgmax) {
  Network net({make_layer(MaxPool2dSpec{2, 2})});
  const Tensor x({1, 1, 2, 4}, std::vector<double>{1, 5, 2, 2, 3, 4, 0, 1});
  net.forward(x);
  const Tensor dx = *net.backward(Tensor({1, 1, 1, 2}, 1.0), true);
  // Windows {1,5,3,4} and {2,2,0,1}: the tie in the second goes to the first index.
  EXPECT_EQ(dx.values(), (std::vector<double>{0, 1, 1, 0, 0, 0, 0, 0}));
}

TEST(Backward, TwoConvNetFiniteDifferences) {
  std::mt19937_64 rng(11);
  Network net = random_net({Conv2dSpec{2, 3, 3, 1, 1}, ReluSpec{}, MaxPool2dSpec{}, Conv2dSpec{3, 2, 3, 1, 1},
                            ReluSpec{}, FlattenSpec{}, DenseSpec{2 * 3 * 3, 3}},
                           rng);
  check_gradients(net, random_tensor({2, 2, 6, 6}, rng), rng);
}

class GradientSeeds : public ::testing::TestWithParam<int> {};

TEST_P(GradientSeeds, EveryLayerKind) {
  std::mt19937_64 rng(1000 + GetParam());
  check_gradients(random_net({Conv2dSpec{2, 2, 3, 2, 1}, ReluSpec{}, MaxPool2dSpec{2, 1}, FlattenSpec{},
                              DenseSpec{2 * 2 * 2, 3}},
                             rng),
                  random_tensor({2, 2, 5, 6}, rng), rng);
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientSeeds, ::testing::Range(0, 20));

TEST(Network, SplitComposeAndParameters) {
  std::mt19937_64 rng(5);
  Network a = random_net({Conv2dSpec{1, 2, 3, 1, 1}, ReluSpec{}, FlattenSpec{}, DenseSpec{2 * 4 * 4, 3}}, rng);
  EXPECT_EQ(a.split_index(), 3u);
  EXPECT_EQ(a.feature_extractor().size(), 3u);
  EXPECT_EQ(a.classifier().size(), 1u);
  EXPECT_EQ(a.parameter_count(), 2u * 9 + 2 + 32 * 3 + 3);
  EXPECT_EQ(a.feature_shape({1, 4, 4}), (Shape{32}));
  // The extractor prefix accepts other spatial sizes.
  EXPECT_EQ(a.feature_extractor().output_shape({1, 7, 5}), (Shape{70}));
  Network b = random_net({Conv2dSpec{1, 2, 3, 1, 1}, ReluSpec{}, FlattenSpec{}, DenseSpec{2 * 4 * 4, 3}}, rng);
  Network c = Network::compose(a, b);
  EXPECT_EQ(c.layers()[0].weight, a.layers()[0].weight);
  EXPECT_EQ(c.layers()[3].weight, b.layers()[3].weight);
}
