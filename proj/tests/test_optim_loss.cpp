#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sgboost/error.hpp"
#include "sgboost/loss.hpp"
#include "sgboost/optim.hpp"

using namespace sgboost;

TEST(Adam, ZeroGradientNoDecayLeavesParameters) {
  Tensor p({3}, std::vector<double>{0.5, -1, 2});
  p.zero_grad();
  AdamState st({0.1, 0.0});
  std::vector<Tensor*> params{&p};
  for (int i = 0; i < 5; ++i) st.step(params);
  EXPECT_EQ(p.values(), (std::vector<double>{0.5, -1, 2}));
}

TEST(Adam, HandSteppedScalar) {
  const AdamConfig cfg{0.1, 1e-4, 0.9, 0.999, 1e-8};
  Tensor p({1}, 0.75);
  AdamState st(cfg);
  std::vector<Tensor*> params{&p};
  double x = 0.75, m = 0, v = 0;
  for (int t = 1; t <= 6; ++t) {
    const double g = 1.0 + 0.25 * t;
    p.zero_grad();
    p.grad()[0] = g;
    st.step(params);
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mh = m / (1 - std::pow(cfg.beta1, t));
    const double vh = v / (1 - std::pow(cfg.beta2, t));
    x = x * (1 - cfg.learning_rate * cfg.weight_decay) - cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    EXPECT_NEAR(p[0], x, 1e-12) << "step " << t;
  }
  EXPECT_EQ(st.steps(), 6u);
}

TEST(Adam, FirstStepWithUnitGradient) {
  Tensor p({1}, 0.0);
  p.zero_grad();
  p.grad()[0] = 1.0;
  AdamState st({0.1, 0.0});
  std::vector<Tensor*> params{&p};
  st.step(params);
  EXPECT_NEAR(p[0], -0.1 / (1 + 1e-8), 1e-15);
}

TEST(Adam, SymmetricParametersStayEqual) {
  Tensor a({2}, std::vector<double>{0.3, 0.3});
  Tensor b({2}, std::vector<double>{0.3, 0.3});
  AdamState st({0.05, 1e-3});
  std::vector<Tensor*> params{&a, &b};
  for (int k = 0; k < 10; ++k) {
    for (Tensor* t : params) {
      t->zero_grad();
      t->grad()[0] = t->grad()[1] = std::sin(k + 1.0);
    }
    st.step(params);
  }
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a[0], a[1]);
}

TEST(Adam, RejectsChangedParameterSetOrMissingGradient) {
  Tensor a({2});
  Tensor b({3});
  AdamState st;
  std::vector<Tensor*> one{&a};
  EXPECT_THROW(st.step(one), StateError);
  a.zero_grad();
  st.step(one);
  b.zero_grad();
  std::vector<Tensor*> two{&a, &b};
  EXPECT_THROW(st.step(two), StateError);
}

TEST(Mse, EqualIsZero) {
  const Tensor p({2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto r = mse_loss(p, p);
  EXPECT_EQ(r.value, 0.0);
  for (double g : r.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(Mse, HandArithmetic) {
  const auto r = mse_loss(Tensor({2}, std::vector<double>{1, 0}), Tensor({2}, std::vector<double>{0, 1}));
  EXPECT_EQ(r.value, 2.0);
  EXPECT_EQ(r.grad.values(), (std::vector<double>{2, -2}));
}

TEST(Mse, MatchesSummationOracle) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  Tensor p({7, 5}), t({7, 5});
  for (auto& v : p.data()) v = nd(rng);
  for (auto& v : t.data()) v = nd(rng);
  long double s = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) s += (long double)(p[i] - t[i]) * (p[i] - t[i]);
  const auto r = mse_loss(p, t);
  EXPECT_NEAR(r.value, double(s), 1e-12);
  for (std::size_t i = 0; i < p.numel(); ++i) EXPECT_EQ(r.grad[i], 2 * (p[i] - t[i]));
}

TEST(Mse, ShapeMismatch) {
  EXPECT_THROW(mse_loss(Tensor({2}), Tensor({3})), GeometryError);
}

TEST(CrossEntropy, ValueAndGradient) {
  const Tensor logits({2, 3}, std::vector<double>{1, 2, 3, 0, 0, 0});
  const std::vector<int> labels{3, 1};
  const auto r = cross_entropy_loss(logits, labels);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(r.value, -std::log(std::exp(3.0) / z) + std::log(3.0), 1e-12);
  EXPECT_NEAR(r.grad[2], std::exp(3.0) / z - 1.0, 1e-12);
  EXPECT_NEAR(r.grad[3], 1.0 / 3 - 1.0, 1e-12);
  EXPECT_NEAR(r.grad[4], 1.0 / 3, 1e-12);
}

TEST(CrossEntropy, StableForLargeLogits) {
  const auto r = cross_entropy_loss(Tensor({1, 2}, std::vector<double>{1000, 0}), std::vector<int>{1});
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_NEAR(r.value, 0.0, 1e-12);
}

TEST(CrossEntropy, BadLabel) {
  EXPECT_THROW(cross_entropy_loss(Tensor({1, 2}), std::vector<int>{3}), LabelError);
  EXPECT_THROW(cross_entropy_loss(Tensor({1, 2}), std::vector<int>{0}), LabelError);
}
