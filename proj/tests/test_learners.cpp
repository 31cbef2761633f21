#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "sgboost/data.hpp"
#include "sgboost/error.hpp"
#include "sgboost/learners.hpp"

using namespace sgboost;

namespace {

std::size_t conv_params(std::size_t in, std::size_t out) { return in * out * 9 + out; }

std::vector<Tensor> snapshot(const Network& net) {
  std::vector<Tensor> out;
  for (const Tensor* p : net.parameters()) out.push_back(*p);
  return out;
}

}  // namespace

TEST(Profiles, LookupByNameAndId) {
  EXPECT_EQ(find_profile("linear").id, 0u);
  EXPECT_EQ(find_profile("tiny-cnn-2conv").id, 1u);
  EXPECT_EQ(find_profile("small-cnn-3conv").id, 2u);
  EXPECT_EQ(find_profile(2u).name, "small-cnn-3conv");
  EXPECT_THROW(find_profile("resnet18"), ConfigError);
  EXPECT_THROW(find_profile(9u), FormatError);
}

TEST(BuildBasic, SameSeedBitIdentical) {
  const auto& p = find_profile("tiny-cnn-2conv");
  const auto a = build_basic_learner(p, {3, 16, 16}, 10, 42);
  const auto b = build_basic_learner(p, {3, 16, 16}, 10, 42);
  const auto c = build_basic_learner(p, {3, 16, 16}, 10, 43);
  EXPECT_EQ(snapshot(a.net), snapshot(b.net));
  EXPECT_NE(snapshot(a.net), snapshot(c.net));
}

TEST(BuildBasic, OutputWidthEqualsClasses) {
  for (std::size_t m : {2u, 10u, 100u}) {
    for (const auto& p : architecture_profiles()) {
      const auto g = build_basic_learner(p, {1, 16, 16}, m, 1);
      EXPECT_EQ(g.net.output_shape({1, 16, 16}), (Shape{m})) << p.name;
      EXPECT_EQ(g.role, LearnerRole::basic);
    }
  }
}

TEST(BuildBasic, ParameterCountClosedForm) {
  const Shape geo{3, 32, 32};
  EXPECT_EQ(build_basic_learner(find_profile("linear"), geo, 10, 0).net.parameter_count(), 3u * 32 * 32 * 10 + 10);
  EXPECT_EQ(build_basic_learner(find_profile("tiny-cnn-2conv"), geo, 10, 0).net.parameter_count(),
            conv_params(3, 8) + conv_params(8, 16) + 16 * 8 * 8 * 10 + 10);
  EXPECT_EQ(build_basic_learner(find_profile("small-cnn-3conv"), geo, 10, 0).net.parameter_count(),
            conv_params(3, 8) + conv_params(8, 16) + conv_params(16, 32) + 32 * 8 * 8 * 10 + 10);
}

TEST(BuildBasic, InitWithinFanInBound) {
  const auto g = build_basic_learner(find_profile("tiny-cnn-2conv"), {2, 8, 8}, 4, 3);
  const auto& head = g.net.layers().back();
  const double bound = 1.0 / std::sqrt(double(g.classifier_width()));
  for (double v : head.weight.values()) EXPECT_LE(std::abs(v), bound);
  for (double v : g.net.layers()[0].weight.values()) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(18.0));
}

TEST(WarmStart, FullMaskKeepsClassifierWidth) {
  const auto& p = find_profile("tiny-cnn-2conv");
  const auto prev = build_basic_learner(p, {1, 16, 16}, 4, 1);
  const auto next = warm_start_learner(prev, SubgridMask::full(16, 16), 4, 2);
  EXPECT_EQ(next.classifier_width(), prev.classifier_width());
  EXPECT_EQ(next.role, LearnerRole::additive);
}

TEST(WarmStart, ExtractorCopiedClassifierFresh) {
  const auto& p = find_profile("small-cnn-3conv");
  const auto prev = build_basic_learner(p, {2, 16, 16}, 5, 1);
  const SubgridMask mask{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15}};
  const auto next = warm_start_learner(prev, mask, 5, 2);
  EXPECT_EQ(next.geometry, (Shape{2, 14, 15}));
  const std::size_t split = prev.net.split_index();
  for (std::size_t i = 0; i < split; ++i) {
    EXPECT_EQ(next.net.layers()[i].weight, prev.net.layers()[i].weight);
    EXPECT_EQ(next.net.layers()[i].bias, prev.net.layers()[i].bias);
  }
  EXPECT_NE(next.net.layers()[split].weight.shape(), prev.net.layers()[split].weight.shape());
  const auto same_mask = warm_start_learner(prev, SubgridMask::full(16, 16), 5, 2);
  EXPECT_NE(same_mask.net.layers()[split].weight, prev.net.layers()[split].weight);
}

TEST(WarmStart, TinyCnnTwentyNineSlice) {
  const auto& p = find_profile("tiny-cnn-2conv");
  const auto prev = build_basic_learner(p, {3, 32, 32}, 10, 1);
  std::vector<std::size_t> keep(29);
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  const auto next = warm_start_learner(prev, SubgridMask{keep, keep}, 10, 2);
  // conv(p1) keeps 29, pool 29 -> 14, conv keeps 14, pool 14 -> 7.
  const std::size_t side = ((29 + 2 - 3 + 1) / 2 + 2 - 3 + 1) / 2;
  EXPECT_EQ(side, 7u);
  EXPECT_EQ(next.classifier_width(), 16u * side * side);
  EXPECT_EQ(prev.classifier_width(), 16u * 8 * 8);
}

TEST(WarmStart, GeometryAlgebraAcrossProfiles) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (const auto& p : architecture_profiles()) {
    for (std::size_t side : {16u, 17u, 24u, 32u}) {
      for (double frac : {0.5, 0.6, 0.9, 1.0}) {
        ImportanceMap m(side, side + 3);
        for (std::size_t r = 0; r < side; ++r)
          for (std::size_t c = 0; c < side + 3; ++c) m.at(r, c) = u(rng);
        const auto mask = select_subgrid(m, frac, frac);
        const auto prev = build_basic_learner(p, {1, side, side + 3}, 3, 1);
        EXPECT_NO_THROW(warm_start_learner(prev, mask, 3, 2)) << p.name << " " << side << " " << frac;
      }
    }
  }
}

TEST(Probe, EqualsBasicWhenPrevIsBasic) {
  const auto basic = build_basic_learner(find_profile("tiny-cnn-2conv"), {1, 8, 8}, 3, 4);
  const Network probe = build_probe(basic, basic);
  Tensor x({2, 1, 8, 8});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (auto& v : x.data()) v = nd(rng);
  EXPECT_EQ(probe.infer(x), basic.net.infer(x));
}

TEST(Probe, FullSizeInputsAfterSubgridTraining) {
  const auto& p = find_profile("tiny-cnn-2conv");
  const auto basic = build_basic_learner(p, {1, 32, 32}, 3, 4);
  std::vector<std::size_t> keep(29);
  std::iota(keep.begin(), keep.end(), std::size_t{1});
  auto prev = warm_start_learner(basic, SubgridMask{keep, keep}, 3, 5);
  for (auto& v : prev.net.layers()[0].weight.data()) v *= 1.5;
  const Network probe = build_probe(prev, basic);
  Tensor x({2, 1, 32, 32}, 0.2);
  const Tensor out = probe.infer(x);
  EXPECT_EQ(out.shape(), (Shape{2, 3}));
  EXPECT_NE(out, basic.net.infer(x));
  // A probe is an independent copy.
  const auto before = snapshot(probe);
  for (auto& v : prev.net.layers()[0].weight.data()) v = 0.0;
  EXPECT_EQ(snapshot(probe), before);
}

TEST(Probe, RejectsFeatureWidthMismatch) {
  const auto a = build_basic_learner(find_profile("tiny-cnn-2conv"), {1, 16, 16}, 3, 1);
  const auto b = build_basic_learner(find_profile("small-cnn-3conv"), {1, 16, 16}, 3, 1);
  EXPECT_THROW(build_probe(b, a), GeometryError);
}

TEST(Train, ZeroTargetsNoDrift) {
  auto g = build_basic_learner(find_profile("tiny-cnn-2conv"), {1, 8, 8}, 3, 1);
  for (auto& v : g.net.layers().back().weight.data()) v = 0.0;
  for (auto& v : g.net.layers().back().bias.data()) v = 0.0;
  const auto before = snapshot(g.net);
  LabeledBatch b;
  b.inputs = Tensor({6, 1, 8, 8});
  b.labels = {1, 2, 3, 1, 2, 3};
  b.classes = 3;
  const BoostWeights w{Tensor({6, 3})};
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.adam.weight_decay = 0.0;
  const auto report = train_weak_learner(g, b, &w, cfg);
  EXPECT_EQ(report.final_loss, 0.0);
  EXPECT_EQ(snapshot(g.net), before);
}

TEST(Train, LinearLearnerReachesLeastSquaresOptimum) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const std::size_t n = 20, d = 4, m = 3;
  LabeledBatch b;
  b.inputs = Tensor({n, 1, 2, 2});
  for (auto& v : b.inputs.data()) v = nd(rng);
  b.labels.assign(n, 1);
  b.classes = m;
  BoostWeights w{Tensor({n, m})};
  for (auto& v : w.values.data()) v = nd(rng);

  Eigen::MatrixXd X(n, d + 1), Y(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) X(i, j) = b.inputs[i * d + j];
    X(i, d) = 1.0;
    for (std::size_t k = 0; k < m; ++k) Y(i, k) = w.values[i * m + k];
  }
  const Eigen::MatrixXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
  const double optimum = (X * beta - Y).squaredNorm() / n;

  auto g = build_basic_learner(find_profile("linear"), {1, 2, 2}, m, 8);
  TrainConfig cfg;
  cfg.epochs = 4000;
  cfg.batch_size = n;
  cfg.adam.learning_rate = 1e-2;
  cfg.adam.weight_decay = 0.0;
  train_weak_learner(g, b, &w, cfg);
  const Tensor pred = predict_scores(g.net, b.inputs);
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) loss += (pred[i] - w.values[i]) * (pred[i] - w.values[i]);
  loss /= n;
  EXPECT_NEAR(loss, optimum, 1e-6 * optimum);
}

TEST(Train, SingleSampleInterpolates) {
  LabeledBatch b;
  b.inputs = Tensor({1, 1, 2, 2}, std::vector<double>{0.5, -1, 2, 0.25});
  b.labels = {2};
  b.classes = 2;
  const BoostWeights w{Tensor({1, 2}, std::vector<double>{-0.7, 0.7})};
  auto g = build_basic_learner(find_profile("linear"), {1, 2, 2}, 2, 1);
  TrainConfig cfg;
  cfg.epochs = 3000;
  cfg.batch_size = 1;
  cfg.adam.learning_rate = 1e-2;
  cfg.adam.weight_decay = 0.0;
  const auto report = train_weak_learner(g, b, &w, cfg);
  EXPECT_LT(report.final_loss, 1e-10);
}

TEST(Train, EpochLossMostlyNonIncreasing) {
  const LabeledBatch b = make_synthetic(3, 400, {1, 12, 12}, 4, 0.8);
  const BoostWeights w = [&] {
    BoostWeights out{Tensor({400, 4}, -1.0)};
    for (std::size_t i = 0; i < 400; ++i) out.values[i * 4 + b.labels[i] - 1] = 3.0;
    return out;
  }();
  std::size_t pairs = 0, good = 0;
  for (std::uint64_t seed : {1u, 2u}) {
    auto g = build_basic_learner(find_profile("tiny-cnn-2conv"), {1, 12, 12}, 4, seed);
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.batch_size = 32;
    cfg.adam.learning_rate = 1e-3;
    cfg.seed = seed;
    const auto r = train_weak_learner(g, b, &w, cfg);
    ASSERT_EQ(r.epoch_losses.size(), 12u);
    for (std::size_t e = 1; e < r.epoch_losses.size(); ++e) {
      ++pairs;
      good += r.epoch_losses[e] <= r.epoch_losses[e - 1];
    }
  }
  EXPECT_GE(double(good) / pairs, 0.9);
}

TEST(Train, CrossEntropyLearnsLabels) {
  const LabeledBatch b = make_synthetic(4, 200, {1, 8, 8}, 3, 0.3);
  auto g = build_basic_learner(find_profile("linear"), {1, 8, 8}, 3, 2);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 25;
  cfg.adam.learning_rate = 1e-2;
  cfg.loss = LossMode::cross_entropy;
  const auto r = train_weak_learner(g, b, nullptr, cfg);
  EXPECT_LT(r.epoch_losses.back(), r.epoch_losses.front());
  const Tensor s = predict_scores(g.net, b.inputs);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto row = s.data().subspan(i * 3, 3);
    hit += std::size_t(std::max_element(row.begin(), row.end()) - row.begin()) + 1 == std::size_t(b.labels[i]);
  }
  EXPECT_GT(hit, 180u);
}

TEST(Train, FreezeExtractorOnlyMovesClassifier) {
  const LabeledBatch b = make_synthetic(5, 64, {1, 8, 8}, 2, 0.5);
  auto g = build_basic_learner(find_profile("tiny-cnn-2conv"), {1, 8, 8}, 2, 3);
  const auto before = snapshot(g.net);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.adam.learning_rate = 1e-2;
  cfg.loss = LossMode::cross_entropy;
  cfg.freeze_extractor = true;
  train_weak_learner(g, b, nullptr, cfg);
  const auto after = snapshot(g.net);
  for (std::size_t i = 0; i + 2 < after.size(); ++i) EXPECT_EQ(after[i], before[i]);
  EXPECT_NE(after[after.size() - 2], before[before.size() - 2]);
}

TEST(Train, RequiresWeightsInLeastSquaresMode) {
  const LabeledBatch b = make_synthetic(5, 16, {1, 8, 8}, 2, 0.5);
  auto g = build_basic_learner(find_profile("linear"), {1, 8, 8}, 2, 3);
  EXPECT_ANY_THROW(train_weak_learner(g, b, nullptr, TrainConfig{}));
}
