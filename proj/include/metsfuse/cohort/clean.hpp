#pragma once

#include <span>
#include <vector>

#include "metsfuse/cohort/io.hpp"
#include "metsfuse/cohort/types.hpp"

namespace metsfuse::cohort {

struct CleanConfig {
  double hr_low = 30.0;
  double hr_high = 220.0;
  double spo2_low = 50.0;
  double spo2_high = 100.0;
  double steps_high = 100000.0;
  double max_drop_fraction = 0.5;  // subjects above this lose all records
};

struct CleanResult {
  std::vector<DailyRecord> records;
  std::vector<AuditEntry> audit;
};

/// Drops records with missing text or out-of-range values, removes subjects that lost too
/// much, then fills missing physiology with the subject's mean. Input order is preserved.
CleanResult clean(std::span<const DailyRecord> records, const CleanConfig& cfg = {});

}  // namespace metsfuse::cohort
