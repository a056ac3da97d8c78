#include "metsfuse/cohort/labeler.hpp"

#include <algorithm>

#include "metsfuse/error.hpp"

namespace metsfuse::cohort {

int MetsLabel::count() const noexcept { return static_cast<int>(std::count(criteria.begin(), criteria.end(), true)); }

MetsLabel label_mets(const ExamPanel& p) {
  p.validate();
  MetsLabel l;
  l.criteria[MetsLabel::Adiposity] = *p.bmi >= 25.0;
  l.criteria[MetsLabel::Glycemia] = *p.fpg >= 6.1 || (p.two_hpg && *p.two_hpg >= 7.8) || p.diagnosed_diabetes;
  l.criteria[MetsLabel::BloodPressure] = *p.sbp >= 140.0 || *p.dbp >= 90.0 || p.diagnosed_hypertension;
  double hdl_cut = *p.sex == Sex::Male ? 0.9 : 1.0;
  l.criteria[MetsLabel::Lipids] = *p.tg >= 1.7 || *p.hdl < hdl_cut;
  l.is_mets = l.count() >= 3;
  return l;
}

SubjectLabels label_subjects(std::span<const ExamPanel> panels) {
  SubjectLabels out;
  for (const auto& p : panels) {
    if (!out.emplace(p.subject_id, label_mets(p).is_mets ? 1 : 0).second) {
      throw DataError("duplicate exam panel for subject " + p.subject_id);
    }
  }
  return out;
}

}  // namespace metsfuse::cohort
