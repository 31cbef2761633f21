#include "sgboost/boosting.hpp"

#include <cmath>
#include <string>

#include "sgboost/error.hpp"

namespace sgboost {

namespace {

void check_scores(const Tensor& scores, std::span<const int> labels) {
  if (scores.rank() != 2) throw GeometryError("score matrix must be [N, M], got " + shape_to_string(scores.shape()));
  if (scores.dim(0) != labels.size()) throw GeometryError("score rows do not match label count");
}

int checked_label(int label, std::size_t classes) {
  if (label < 1 || static_cast<std::size_t>(label) > classes) {
    throw LabelError("label " + std::to_string(label) + " outside 1.." + std::to_string(classes));
  }
  return label - 1;
}

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace

double multiclass_loss(std::span<const double> scores, int label) {
  const int z = checked_label(label, scores.size());
  const double fz = scores[static_cast<std::size_t>(z)];
  double total = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (static_cast<int>(j) != z) total += std::exp(-0.5 * (fz - scores[j]));
  }
  return total;
}

double risk(const Tensor& scores, std::span<const int> labels) {
  check_scores(scores, labels);
  if (labels.empty()) throw GeometryError("risk of an empty batch");
  const std::size_t m = scores.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) total += multiclass_loss(scores.data().subspan(i * m, m), labels[i]);
  return total / static_cast<double>(labels.size());
}

BoostWeights compute_boost_weights(const Tensor& scores, std::span<const int> labels) {
  check_scores(scores, labels);
  const std::size_t n = scores.dim(0), m = scores.dim(1);
  BoostWeights w{Tensor({n, m})};
  auto f = scores.data();
  auto out = w.values.data();
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = static_cast<std::size_t>(checked_label(labels[i], m));
    const double* row = f.data() + i * m;
    double* wrow = out.data() + i * m;
    CompensatedSum positive;
    for (std::size_t k = 0; k < m; ++k) {
      if (k == z) continue;
      const double e = std::exp(-0.5 * (row[z] - row[k]));
      wrow[k] = -e;
      positive.add(e);
    }
    wrow[z] = positive.value();
  }
  return w;
}

double functional_gradient(const Tensor& candidate, const BoostWeights& weights) {
  if (candidate.shape() != weights.values.shape()) {
    throw GeometryError("functional gradient: candidate " + shape_to_string(candidate.shape()) +
                        " vs weights " + shape_to_string(weights.values.shape()));
  }
  auto g = candidate.data();
  auto w = weights.values.data();
  double dot = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * w[i];
  return -dot / (2.0 * static_cast<double>(weights.size()));
}

double risk_slope(const Tensor& scores, const Tensor& candidate, std::span<const int> labels, double alpha) {
  check_scores(scores, labels);
  if (candidate.shape() != scores.shape()) throw GeometryError("line search candidate shape mismatch");
  const std::size_t n = scores.dim(0), m = scores.dim(1);
  auto f = scores.data();
  auto g = candidate.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = static_cast<std::size_t>(checked_label(labels[i], m));
    const double* fr = f.data() + i * m;
    const double* gr = g.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == z) continue;
      const double dg = gr[z] - gr[j];
      total += -0.5 * dg * std::exp(-0.5 * ((fr[z] - fr[j]) + alpha * dg));
    }
  }
  return total / static_cast<double>(n);
}

double line_search(const Tensor& scores, const Tensor& candidate, std::span<const int> labels,
                   const LineSearchOptions& options) {
  if (!(options.alpha_max > 0.0)) throw ConfigError("line search needs alpha_max > 0");
  auto slope = [&](double a) {
    const double d = risk_slope(scores, candidate, labels, a);
    if (!std::isfinite(d)) throw NumericError("non-finite risk slope during line search at alpha " + std::to_string(a));
    return d;
  };
  if (slope(0.0) >= 0.0) return 0.0;
  if (slope(options.alpha_max) <= 0.0) return options.alpha_max;
  double lo = 0.0, hi = options.alpha_max;
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double d = slope(mid);
    if (hi - lo <= options.tolerance && std::abs(d) <= options.tolerance) break;
    if (d < 0.0) {
      lo = mid;
    } else if (d > 0.0) {
      hi = mid;
    } else {
      break;
    }
  }
  const double r = risk(scores, labels);
  if (!std::isfinite(r)) throw NumericError("non-finite risk during line search");
  return mid;
}

Tensor ensemble_predict(const BoostEnsemble& ensemble, const Tensor& inputs) {
  if (inputs.rank() != 4) throw GeometryError("ensemble input must be [N, C, H, W]");
  const Shape sample(inputs.shape().begin() + 1, inputs.shape().end());
  if (sample != ensemble.geometry()) {
    throw GeometryError("ensemble expects samples of shape " + shape_to_string(ensemble.geometry()) + ", got " +
                        shape_to_string(sample));
  }
  Tensor scores = predict_scores(ensemble.basic.net, inputs);
  auto out = scores.data();
  for (const auto& stage : ensemble.stages) {
    const double coef = ensemble.shrinkage * stage.alpha;
    const Tensor g = predict_scores(stage.learner.net, slice_inputs(inputs, stage.mask));
    auto gv = g.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coef * gv[i];
  }
  return scores;
}

double risk(const BoostEnsemble& ensemble, const LabeledBatch& batch) {
  return risk(ensemble_predict(ensemble, batch.inputs), batch.labels);
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  if (scores.rank() != 2) throw GeometryError("argmax_rows expects [N, M]");
  const std::size_t n = scores.dim(0), m = scores.dim(1);
  std::vector<std::size_t> out(n, 0);
  auto s = scores.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 1; k < m; ++k) {
      if (s[i * m + k] > s[i * m + out[i]]) out[i] = k;
    }
  }
  return out;
}

double accuracy(const Tensor& scores, std::span<const int> labels) {
  check_scores(scores, labels);
  if (labels.empty()) return 0.0;
  const auto pred = argmax_rows(scores);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += static_cast<int>(pred[i]) + 1 == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

RoundResult boost_round(BoostEnsemble& ensemble, const LabeledBatch& train, Tensor& train_scores,
                        const SubgridMask& mask, const RoundConfig& config) {
  mask.validate(ensemble.geometry()[1], ensemble.geometry()[2]);
  RoundResult result;
  result.risk_before = risk(train_scores, train.labels);
  const BoostWeights weights = compute_boost_weights(train_scores, train.labels);

  WeakLearner learner = warm_start_learner(ensemble.last_learner(), mask, ensemble.classes, config.learner_seed);
  const LabeledBatch sliced = slice_batch(train, mask);
  result.training = train_weak_learner(learner, sliced, &weights, config.train);

  const Tensor candidate = predict_scores(learner.net, sliced.inputs);
  result.directional_derivative = functional_gradient(candidate, weights);
  double alpha = line_search(train_scores, candidate, train.labels, config.line_search);

  Tensor updated = train_scores;
  auto apply = [&](double a) {
    auto u = updated.data();
    auto f = train_scores.data();
    auto g = candidate.data();
    const double coef = ensemble.shrinkage * a;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = f[i] + coef * g[i];
  };
  apply(alpha);
  double after = risk(updated, train.labels);
  if (!std::isfinite(after)) throw NumericError("non-finite training risk after boosting round");
  if (after > result.risk_before) {
    alpha = 0.0;
    apply(alpha);
    after = risk(updated, train.labels);
  }
  result.alpha = alpha;
  result.risk_after = after;
  train_scores = std::move(updated);
  ensemble.stages.push_back(BoostStage{std::move(learner), alpha, mask});
  return result;
}

}  // namespace sgboost
