#pragma once

#include <span>

namespace metsfuse::cohort {

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// Two-sample t-test without the equal-variance assumption (Welch-Satterthwaite df).
/// Each sample needs at least two values and positive variance.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> x);
/// Unbiased (n - 1) variance.
double sample_variance(std::span<const double> x);

}  // namespace metsfuse::cohort
