#include "metsfuse/cohort/guard.hpp"

#include <fmt/format.h>

#include "metsfuse/error.hpp"

namespace metsfuse::cohort {

TrainingScope::TrainingScope(const SplitPlan& plan, std::set<int> partitions)
    : plan_(&plan), partitions_(std::move(partitions)) {
  if (partitions_.count(kTestPartition)) throw LeakageError("the test partition cannot be a training partition");
}

void TrainingScope::require(std::span<const DailyRecord> records, std::string_view what) const {
  for (const auto& r : records) {
    int p = plan_->partition_of(r);
    if (!partitions_.count(p)) {
      throw LeakageError(fmt::format("{}: record {} belongs to partition {}, outside the training partitions {{{}}}",
                                     what, r.key(), p, fmt::join(partitions_, ", ")));
    }
  }
}

corpus::Vocabulary TrainingScope::fit_vocabulary(std::span<const DailyRecord> records, std::size_t max_size) const {
  require(records, "fit_vocabulary");
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.text.value_or(""));
  return corpus::Vocabulary::build(texts, max_size);
}

FeatureSpec TrainingScope::select_features(std::span<const DailyRecord> records, const SubjectLabels& labels,
                                           double alpha) const {
  require(records, "select_features");
  auto y = record_labels(records, labels);
  return cohort::select_features(records, y, alpha);
}

void TrainingScope::fit_normalization(FeatureSpec& spec, std::span<const DailyRecord> records) const {
  require(records, "fit_normalization");
  cohort::fit_normalization(spec, records);
}

}  // namespace metsfuse::cohort
