#include "metsfuse/numerics/adamw.hpp"

#include <cmath>

#include "metsfuse/error.hpp"

namespace metsfuse::num {

AdamW::AdamW(const ParameterSet& params, AdamWConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Tensor::zeros_like(params[i].value));
    v_.push_back(Tensor::zeros_like(params[i].value));
  }
}

void AdamW::step(ParameterSet& params) {
  if (params.size() != m_.size()) throw ShapeError("AdamW: parameter set changed since construction");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.grad.shape() != p.value.shape() || m_[i].shape() != p.value.shape()) {
      throw ShapeError("AdamW: shape mismatch for parameter " + p.name);
    }
    if (p.requires_grad && !p.grad.all_finite()) {
      throw NumericError("AdamW: non-finite gradient for parameter " + p.name);
    }
  }
  ++t_;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.requires_grad) continue;
    auto& w = p.value.storage();
    const auto& g = p.grad.storage();
    auto& m = m_[i].storage();
    auto& v = v_[i].storage();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      w[k] -= lr * (m_hat / (std::sqrt(v_hat) + config_.epsilon) + config_.weight_decay * w[k]);
    }
  }
}

}  // namespace metsfuse::num
