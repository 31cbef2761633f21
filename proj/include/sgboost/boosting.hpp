#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sgboost/batch.hpp"
#include "sgboost/learners.hpp"
#include "sgboost/subgrid.hpp"

namespace sgboost {

/// L(z, f) = sum_{j != z} exp(-(f_z - f_j) / 2) for a 1-based label z.
double multiclass_loss(std::span<const double> scores, int label);

/// Mean multiclass loss over the rows of an [N, M] score matrix.
double risk(const Tensor& scores, std::span<const int> labels);

/// w_k = -exp(-(f_z - f_k)/2) for k != z and w_z = -sum_{k != z} w_k, i.e.
/// the rows sum to zero and w = -2 dL/df.
BoostWeights compute_boost_weights(const Tensor& scores, std::span<const int> labels);

/// Directional derivative of the risk along g: -(1 / 2N) sum_i g_i . w_i.
double functional_gradient(const Tensor& candidate, const BoostWeights& weights);

/// d/d alpha of risk(scores + alpha * candidate).
double risk_slope(const Tensor& scores, const Tensor& candidate, std::span<const int> labels, double alpha);

struct LineSearchOptions {
  double alpha_max = 10.0;
  double tolerance = 1e-6;
};

/// argmin over [0, alpha_max] of risk(scores + alpha * candidate). The
/// objective is convex in alpha, so bisection on the slope is exact.
double line_search(const Tensor& scores, const Tensor& candidate, std::span<const int> labels,
                   const LineSearchOptions& options = {});

struct BoostStage {
  WeakLearner learner;
  double alpha = 0.0;
  SubgridMask mask;
};

/// f(x) = g0(x) + sum_t nu * alpha_t * g_t(x sliced by P_t).
struct BoostEnsemble {
  WeakLearner basic;
  std::vector<BoostStage> stages;
  double shrinkage = 0.02;
  std::size_t classes = 0;

  const Shape& geometry() const noexcept { return basic.geometry; }
  const WeakLearner& last_learner() const { return stages.empty() ? basic : stages.back().learner; }
};

/// Ensemble scores for [N, C, H, W] full-size inputs, as [N, M].
Tensor ensemble_predict(const BoostEnsemble& ensemble, const Tensor& inputs);
double risk(const BoostEnsemble& ensemble, const LabeledBatch& batch);

/// 0-based argmax per row (first maximum on ties).
std::vector<std::size_t> argmax_rows(const Tensor& scores);
double accuracy(const Tensor& scores, std::span<const int> labels);

struct RoundConfig {
  TrainConfig train;
  LineSearchOptions line_search;
  std::uint64_t learner_seed = 0;  // classifier initialization
};

struct RoundResult {
  double alpha = 0.0;
  double directional_derivative = 0.0;
  double risk_before = 0.0;
  double risk_after = 0.0;
  TrainReport training;
};

/// One boosting round on the full training set: boosting weights from the
/// current scores, a warm-started learner trained on the `mask` slice, line
/// search, then append with shrinkage. `train_scores` holds the ensemble
/// scores on `train` and is updated in place.
RoundResult boost_round(BoostEnsemble& ensemble, const LabeledBatch& train, Tensor& train_scores,
                        const SubgridMask& mask, const RoundConfig& config);

}  // namespace sgboost
