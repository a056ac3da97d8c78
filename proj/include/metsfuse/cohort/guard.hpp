#pragma once

#include <set>
#include <span>
#include <string_view>

#include "metsfuse/cohort/features.hpp"
#include "metsfuse/cohort/split.hpp"
#include "metsfuse/corpus/vocabulary.hpp"

namespace metsfuse::cohort {

/// Fitting steps bound to the training partitions of one rotation. Every fit checks that all
/// records it is given belong to those partitions and throws LeakageError otherwise.
class TrainingScope {
 public:
  TrainingScope(const SplitPlan& plan, std::set<int> partitions);

  void require(std::span<const DailyRecord> records, std::string_view what) const;

  corpus::Vocabulary fit_vocabulary(std::span<const DailyRecord> records, std::size_t max_size = 2048) const;
  FeatureSpec select_features(std::span<const DailyRecord> records, const SubjectLabels& labels,
                              double alpha = 0.01) const;
  void fit_normalization(FeatureSpec& spec, std::span<const DailyRecord> records) const;

  const std::set<int>& partitions() const noexcept { return partitions_; }

 private:
  const SplitPlan* plan_;
  std::set<int> partitions_;
};

}  // namespace metsfuse::cohort
