#pragma once

#include <functional>
#include <string>
#include <vector>

#include "metsfuse/numerics/tape.hpp"

namespace metsfuse::num {

struct ParamGradError {
  std::string name;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;  // trainable parameters only
  double max_relative_error = 0.0;
  bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

/// Builds a fresh tape and returns the scalar loss. Must be deterministic: any randomness
/// (dropout masks) has to be re-seeded on every call.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares tape gradients against central finite differences for every trainable
/// parameter. Relative error per element is |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(ParameterSet& params, const LossBuilder& build, double h = 1e-5,
                           double floor = 1e-6);

}  // namespace metsfuse::num
