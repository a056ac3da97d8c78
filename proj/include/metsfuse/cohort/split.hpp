#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsfuse/cohort/types.hpp"

namespace metsfuse::cohort {

enum class SplitMode { Subject, Record };

inline constexpr int kTestPartition = 0;

/// Partition 0 is the held-out test set; 1..k are cross-validation folds.
struct SplitPlan {
  SplitMode mode = SplitMode::Subject;
  int k = 3;
  double test_fraction = 0.25;
  std::uint64_t seed = 0;
  std::map<std::string, int> subjects;  // subject mode: subject -> partition
  std::map<std::string, int> records;   // record mode: record key -> partition

  /// Partition of a record. Augmented copies resolve through their source's key.
  int partition_of(const DailyRecord& r) const;
  /// Indices of records whose partition is in `partitions`, in input order.
  std::vector<std::size_t> select(std::span<const DailyRecord> records, const std::set<int>& partitions) const;
  std::vector<std::string> test_record_ids(std::span<const DailyRecord> records) const;

  nlohmann::json to_json() const;
  static SplitPlan from_json(const nlohmann::json& j);
  bool operator==(const SplitPlan&) const = default;
};

/// Stratified split. Subject mode assigns whole subjects: a greedy pass per class picks test
/// subjects toward test_fraction of that class's records, and the rest are dealt into the
/// k folds, each subject going to the fold with the fewest records of its class so far.
/// Record mode does the same with individual records. Needs >= k+1 subjects per class.
SplitPlan split(std::span<const DailyRecord> records, const SubjectLabels& labels, double test_fraction = 0.25,
                int k = 3, std::uint64_t seed = 0, SplitMode mode = SplitMode::Subject);

/// Training partitions for a rotation that holds out `validation_fold`.
std::set<int> training_partitions(const SplitPlan& plan, int validation_fold);

}  // namespace metsfuse::cohort
