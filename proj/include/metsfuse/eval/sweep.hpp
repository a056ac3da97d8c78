#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "metsfuse/eval/cross_validate.hpp"

namespace metsfuse::eval {

struct SweepConfig {
  std::vector<double> ratios{0.30, 0.35, 0.40, 0.45, 0.50};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  double test_fraction = 0.25;
  int k = 3;
  cohort::SplitMode mode = cohort::SplitMode::Subject;
  /// Template for every cell; target_ratio and hp.seed are overwritten per cell.
  CvConfig cv;
  /// Cells run in parallel; each cell's rotations run serially.
  std::size_t jobs = 1;

  void validate() const;
};

struct SweepCell {
  double ratio = 0.0;
  std::uint64_t seed = 0;
  EvalReport report;
};

/// One metric at one ratio over all folds x seeds test scores. The interval is the normal
/// approximation mean +- 1.96 sd / sqrt(n) with the sample standard deviation.
struct SweepRow {
  double ratio = 0.0;
  std::string metric;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_runs = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // ratio-major, then seed
  std::vector<SweepRow> rows;    // ratio-major, metrics in kMetricNames order

  std::size_t n_runs() const;
  /// Mean of `metric` at `ratio`; throws ConfigError when absent.
  const SweepRow& row(double ratio, const std::string& metric) const;
  /// ratio,metric,mean,ci_low,ci_high,n_runs
  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;
};

/// For every ratio and seed: splits with that seed, augments each training partition to the
/// ratio and cross-validates from scratch. Cells with the same seed share one split.
SweepResult imbalance_sweep(std::span<const cohort::DailyRecord> records, const cohort::SubjectLabels& labels,
                            const SweepConfig& cfg);

std::vector<SweepRow> summarize(const std::vector<SweepCell>& cells);

}  // namespace metsfuse::eval
