#pragma once

#include <cstdint>
#include <vector>

#include "metsfuse/numerics/tape.hpp"

namespace metsfuse::num {

struct AdamWConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay (Loshchilov & Hutter):
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + wd * w)
/// Moments are kept per parameter in the order of the ParameterSet; parameters with
/// requires_grad == false are left untouched.
class AdamW {
 public:
  explicit AdamW(const ParameterSet& params, AdamWConfig config = {});

  /// Applies one update from the gradients currently stored in `params`.
  /// Throws NumericError naming the parameter when a gradient is non-finite; in that
  /// case no parameter is modified.
  void step(ParameterSet& params);

  std::uint64_t steps() const noexcept { return t_; }
  const AdamWConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr) noexcept { config_.learning_rate = lr; }

  const Tensor& first_moment(std::size_t i) const { return m_[i]; }
  const Tensor& second_moment(std::size_t i) const { return v_[i]; }

 private:
  AdamWConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t t_ = 0;
};

}  // namespace metsfuse::num
