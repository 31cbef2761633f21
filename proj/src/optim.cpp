#include "sgboost/optim.hpp"

#include <cmath>

#include "sgboost/error.hpp"

namespace sgboost {

void AdamState::step(std::span<Tensor* const> params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->numel(), 0.0);
      v_[i].assign(params[i]->numel(), 0.0);
    }
  }
  if (params.size() != m_.size()) throw StateError("ADAM state bound to a different parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->numel() != m_[i].size()) throw StateError("ADAM moment shape does not match parameter");
    if (!params[i]->has_grad()) throw StateError("ADAM step on a parameter without gradient");
  }

  ++step_;
  const auto& c = config_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const double shrink = 1.0 - c.learning_rate * c.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = std::as_const(*params[i]).grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] = p[j] * shrink - c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace sgboost
