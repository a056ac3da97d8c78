#pragma once

#include <span>

#include "metsfuse/models/hyperparams.hpp"
#include "metsfuse/numerics/tape.hpp"

namespace metsfuse::models {

/// Pair term: squared distance for equal labels, max(0, eps - squared distance) otherwise.
/// The classical variant uses max(0, eps - distance)^2 for the unequal case.
double contrastive_loss(std::span<const double> zi, std::span<const double> zj, int yi, int yj, double epsilon,
                        bool classical = false);

/// Mean of contrastive_loss over all unordered row pairs of z [batch, dim]. Needs batch >= 2.
num::Var contrastive_all_pairs(num::Var z, std::span<const int> labels, double epsilon, bool classical = false);

/// Mean binary cross-entropy on column 1 of probs [batch, 2], clamped to [1e-12, 1 - 1e-12].
num::Var cross_entropy(num::Var probs, std::span<const int> labels);

struct LossParts {
  num::Var total;
  double loss = 0.0;
  double ce = 0.0;
  double con = 0.0;  // 0 when alpha == 1
};

/// alpha * CE + (1 - alpha) * CON.
LossParts batch_loss(num::Var probs, num::Var z, std::span<const int> labels, const HyperParams& hp);

}  // namespace metsfuse::models
