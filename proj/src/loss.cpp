#include "sgboost/loss.hpp"

#include <algorithm>
#include <cmath>

#include "sgboost/error.hpp"

namespace sgboost {

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw GeometryError("mse_loss shape mismatch: " + shape_to_string(pred.shape()) + " vs " +
                        shape_to_string(target.shape()));
  }
  LossResult result{0.0, Tensor(pred.shape())};
  auto p = pred.data();
  auto t = target.data();
  auto g = result.grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    result.value += d * d;
    g[i] = 2.0 * d;
  }
  return result;
}

LossResult cross_entropy_loss(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw GeometryError("cross_entropy_loss expects [N, M] logits with N labels");
  }
  const std::size_t n = logits.dim(0), m = logits.dim(1);
  LossResult result{0.0, Tensor(logits.shape())};
  auto x = logits.data();
  auto g = result.grad.data();
  for (std::size_t i = 0; i < n; ++i) {
    const int z = labels[i];
    if (z < 1 || static_cast<std::size_t>(z) > m) throw LabelError("label out of range in cross_entropy_loss");
    const double* row = x.data() + i * m;
    const double peak = *std::max_element(row, row + m);
    double denom = 0.0;
    for (std::size_t k = 0; k < m; ++k) denom += std::exp(row[k] - peak);
    const double log_denom = std::log(denom) + peak;
    result.value += log_denom - row[z - 1];
    for (std::size_t k = 0; k < m; ++k) g[i * m + k] = std::exp(row[k] - log_denom);
    g[i * m + static_cast<std::size_t>(z - 1)] -= 1.0;
  }
  return result;
}

}  // namespace sgboost
