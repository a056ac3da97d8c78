#pragma once

#include <array>
#include <span>
#include <vector>

#include "metsfuse/cohort/types.hpp"

namespace metsfuse::cohort {

struct MetsLabel {
  enum Criterion { Adiposity = 0, Glycemia = 1, BloodPressure = 2, Lipids = 3 };

  std::array<bool, 4> criteria{};
  bool is_mets = false;

  int count() const noexcept;
  bool operator==(const MetsLabel&) const = default;
};

/// Diagnosis by the four-criteria rule: three or more met means MetS.
MetsLabel label_mets(const ExamPanel& panel);

/// Validates and labels every panel.
SubjectLabels label_subjects(std::span<const ExamPanel> panels);

}  // namespace metsfuse::cohort
