#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsfuse/cohort/augment.hpp"
#include "metsfuse/cohort/features.hpp"
#include "metsfuse/cohort/split.hpp"
#include "metsfuse/eval/metrics.hpp"
#include "metsfuse/models/trainer.hpp"

namespace metsfuse::eval {

struct CvConfig {
  models::Architecture architecture = models::Architecture::TsHcl;
  models::HyperParams hp;
  corpus::EncoderConfig encoder;
  /// Minority share the training partition is augmented to; 0 disables augmentation.
  double target_ratio = 0.5;
  std::size_t max_copies_per_source = 16;
  cohort::AugmenterList augmenters = cohort::default_augmenters();
  std::size_t vocab_max = 2048;
  double feature_alpha = 0.01;
  /// Retained features; selected on all non-test records when absent.
  std::optional<cohort::FeatureSpec> features;
  double threshold = 0.5;
  std::size_t jobs = 1;
};

struct RotationResult {
  int validation_fold = 0;
  std::set<int> train_folds;
  std::size_t n_train = 0;      // including augmented copies
  std::size_t n_augmented = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  Scores val;   // at the selected epoch
  Scores test;  // of the selected checkpoint
  models::TrainHistory history;
  std::size_t parameter_count = 0;
};

inline constexpr std::array<const char*, 5> kMetricNames{"acc", "pre", "rec", "f1", "auroc"};

struct Aggregate {
  std::array<double, 5> mean{};
  std::array<double, 5> std{};  // population
};

/// Mean and population standard deviation of each metric over the given scores.
Aggregate aggregate(std::span<const Scores> scores);
double population_std(std::span<const double> values);

struct EvalReport {
  std::string architecture;
  double threshold = 0.5;
  std::vector<RotationResult> rotations;
  Aggregate test;
  Aggregate val;
  cohort::FeatureSpec features;

  bool diverged() const;
  nlohmann::json to_json() const;
  /// Table-2 layout: one row per rotation and an "Average (Std)" row, in percent.
  void write_table_csv(std::ostream& out) const;
};

/// For each fold v: trains on the other folds (augmented to cfg.target_ratio, with
/// vocabulary and normalization fitted there), keeps the epoch with the best AUROC on fold
/// v, and scores that model on the test partition.
EvalReport cross_validate(std::span<const cohort::DailyRecord> records, const cohort::SubjectLabels& labels,
                          const cohort::SplitPlan& plan, const CvConfig& cfg);

/// Pieces of one rotation, exposed for training a single model outside cross-validation.
struct RotationData {
  std::vector<cohort::DailyRecord> train;  // augmented
  std::vector<cohort::DailyRecord> val;
  std::vector<cohort::DailyRecord> test;
  std::size_t n_augmented = 0;
  corpus::Vocabulary vocab;
  cohort::FeatureSpec features;  // fitted on the original training records
};

RotationData prepare_rotation(std::span<const cohort::DailyRecord> records, const cohort::SubjectLabels& labels,
                              const cohort::SplitPlan& plan, int validation_fold, const CvConfig& cfg,
                              const cohort::FeatureSpec& selected);

/// Feature selection on every non-test record, through the leakage guard.
cohort::FeatureSpec select_on_training(std::span<const cohort::DailyRecord> records,
                                       const cohort::SubjectLabels& labels, const cohort::SplitPlan& plan,
                                       double alpha);

/// `selected` plus the physiological inputs the architecture is wired to. Selection prunes
/// optional features only; a structural input it rejected is kept and logged.
cohort::FeatureSpec with_required(const cohort::FeatureSpec& selected, models::Architecture arch);

/// Seed of the model trained in a rotation.
std::uint64_t rotation_seed(std::uint64_t seed, int validation_fold);

}  // namespace metsfuse::eval
