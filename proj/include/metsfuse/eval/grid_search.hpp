#pragma once

#include <iosfwd>
#include <vector>

#include "metsfuse/eval/cross_validate.hpp"

namespace metsfuse::eval {

struct GridSpec {
  std::vector<models::Architecture> architectures{models::Architecture::TsHcl};
  std::vector<std::size_t> reduced_dims{2, 3, 4, 8};
  std::vector<std::size_t> hidden_dims{16, 32, 64};
  std::vector<double> dropouts{0.1, 0.3, 0.5};

  std::size_t size() const noexcept {
    return architectures.size() * reduced_dims.size() * hidden_dims.size() * dropouts.size();
  }
  nlohmann::json to_json() const;
  /// Missing keys keep defaults; unknown keys are rejected.
  static GridSpec from_json(const nlohmann::json& j);
};

struct Trial {
  std::size_t index = 0;  // position in grid enumeration order
  models::Architecture architecture = models::Architecture::TsHcl;
  std::size_t reduced_dim = 0;
  std::size_t hidden_dim = 0;
  double dropout_p = 0.0;
  std::size_t parameter_count = 0;
  std::vector<double> val_auroc;  // per rotation
  Aggregate val;
  Aggregate test;
  bool diverged = false;

  double mean_val_auroc() const { return val.mean[4]; }
};

struct GridResult {
  std::vector<Trial> trials;  // ranked

  /// rank,architecture,reduced_dim,hidden_dim,dropout_p,parameter_count,
  /// mean_val_auroc,std_val_auroc,mean_test_auroc,std_test_auroc,diverged
  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;
};

/// Highest mean validation AUROC first; ties go to the smaller model, then grid order.
std::vector<Trial> rank_trials(std::vector<Trial> trials);

/// Cross-validates every combination on the same plan with the seed of `base`. Trials run
/// in parallel with base.jobs; features are selected once for all trials. Throws
/// ConfigError on an empty grid.
GridResult grid_search(std::span<const cohort::DailyRecord> records, const cohort::SubjectLabels& labels,
                       const cohort::SplitPlan& plan, const GridSpec& grid, const CvConfig& base);

}  // namespace metsfuse::eval
