#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsfuse/models/fusion.hpp"

namespace metsfuse::explain {

inline constexpr const char* kTextFeature = "text";

struct PfiConfig {
  std::size_t repetitions = 50;
  std::uint64_t seed = 0;
  /// Features to permute; empty means text plus every retained physiological feature.
  std::vector<std::string> features;
  std::size_t jobs = 1;
};

struct FeatureImportance {
  std::string feature;
  double importance = 0.0;             // baseline - mean(permuted)
  std::vector<double> permuted_auroc;  // one per repetition
};

struct PfiReport {
  double baseline_auroc = 0.0;
  std::size_t repetitions = 0;
  std::uint64_t seed = 0;
  std::vector<FeatureImportance> features;  // by importance, descending

  /// Recomputes every importance from the stored permuted values; max absolute deviation.
  double identity_error() const;
  const FeatureImportance& get(const std::string& feature) const;
  nlohmann::json to_json() const;
  /// rank,feature,importance,decline_pct,baseline_auroc,mean_permuted_auroc
  void write_csv(std::ostream& out) const;
};

/// Permutation feature importance on AUROC. Each repetition r of feature f shuffles that
/// feature across the records with a stream derived from (seed, f, r); text moves as a whole
/// field. Physiological features the model does not use are accepted and score 0. Needs
/// at least 10 records and both classes. Inputs are not modified.
PfiReport pfi(const models::FusionModel& model, std::span<const cohort::DailyRecord> records,
              std::span<const int> labels, const PfiConfig& cfg = {});

}  // namespace metsfuse::explain
