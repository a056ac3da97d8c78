#pragma once

#include <array>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsfuse/cohort/types.hpp"
#include "metsfuse/numerics/tensor.hpp"

namespace metsfuse::cohort {

struct FeatureStats {
  double mean = 0.0;
  double std = 1.0;
  bool operator==(const FeatureStats&) const = default;
};

/// Retained physiological features in canonical order (hr_min, hr_max, spo2_mean, steps),
/// with z-score statistics once fitted.
struct FeatureSpec {
  std::vector<PhysioFeature> features;
  std::vector<FeatureStats> stats;  // parallel to features; empty until fitted
  std::array<double, 4> p_values{1.0, 1.0, 1.0, 1.0};  // selection test per feature, canonical order

  bool fitted() const noexcept { return !features.empty() && stats.size() == features.size(); }
  bool retains(PhysioFeature f) const;
  /// Column of f in the normalized matrix; throws ConfigError when not retained.
  std::size_t column(PhysioFeature f) const;

  nlohmann::json to_json() const;
  static FeatureSpec from_json(const nlohmann::json& j);
  bool operator==(const FeatureSpec&) const = default;
};

/// Keeps each feature whose Welch test between classes gives p < alpha.
/// `labels` is parallel to `records`. Throws DataError if a class is absent or nothing is kept.
FeatureSpec select_features(std::span<const DailyRecord> records, std::span<const int> labels, double alpha = 0.01);

/// Spec retaining the given features, unfitted.
FeatureSpec make_feature_spec(std::vector<PhysioFeature> features);

/// Fits mean and population std of each retained feature. Records must be complete for the
/// retained fields. Throws NumericError if a std is zero. Callers inside a cross-validation
/// rotation should go through TrainingScope::fit_normalization.
void fit_normalization(FeatureSpec& spec, std::span<const DailyRecord> records);

/// [n, features] matrix of (x - mean) / std. Throws ConfigError on an unfitted spec.
num::Tensor normalize(std::span<const DailyRecord> records, const FeatureSpec& spec);

}  // namespace metsfuse::cohort
