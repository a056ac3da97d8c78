#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace metsfuse::cohort {

enum class Sex { Male, Female };

/// Physical-examination values for one subject. Optional fields may be absent in input;
/// validate() reports which required ones are missing.
struct ExamPanel {
  std::string subject_id;
  std::optional<double> bmi;      // kg/m^2
  std::optional<double> fpg;      // fasting plasma glucose, mmol/L
  std::optional<double> two_hpg;  // 2-hour post-load glucose, mmol/L
  std::optional<double> sbp;      // mmHg
  std::optional<double> dbp;      // mmHg
  std::optional<double> tg;       // triglycerides, mmol/L
  std::optional<double> hdl;      // HDL cholesterol, mmol/L
  std::optional<Sex> sex;
  bool diagnosed_diabetes = false;
  bool diagnosed_hypertension = false;
  std::optional<double> age;     // years
  std::optional<double> height;  // cm
  std::optional<double> waist;   // cm

  /// Throws DataError listing missing required fields (bmi, fpg, sbp, dbp, tg, hdl, sex),
  /// non-positive values, or dbp >= sbp.
  void validate() const;
};

enum class Provenance { Measured, Imputed, Augmented };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

enum class PhysioFeature { HrMin, HrMax, Spo2Mean, Steps };

inline constexpr std::array<PhysioFeature, 4> kAllPhysio{PhysioFeature::HrMin, PhysioFeature::HrMax,
                                                         PhysioFeature::Spo2Mean, PhysioFeature::Steps};

std::string_view to_string(PhysioFeature f);
PhysioFeature parse_physio_feature(std::string_view s);

struct RecordProvenance {
  Provenance text = Provenance::Measured;
  std::array<Provenance, 4> physio{Provenance::Measured, Provenance::Measured, Provenance::Measured,
                                   Provenance::Measured};

  Provenance& operator[](PhysioFeature f) { return physio[static_cast<std::size_t>(f)]; }
  Provenance operator[](PhysioFeature f) const { return physio[static_cast<std::size_t>(f)]; }
  bool operator==(const RecordProvenance&) const = default;
};

/// One subject-day.
struct DailyRecord {
  std::string subject_id;
  int day_index = 0;
  std::optional<std::string> text;
  std::optional<double> hr_min;     // bpm
  std::optional<double> hr_max;     // bpm
  std::optional<double> spo2_mean;  // percent
  std::optional<double> steps;      // count
  RecordProvenance provenance;

  std::optional<double>& value(PhysioFeature f);
  const std::optional<double>& value(PhysioFeature f) const;
  /// "subject#day"; augmented copies share the key of their source.
  std::string key() const;
  bool is_augmented() const noexcept { return provenance.text == Provenance::Augmented; }

  bool operator==(const DailyRecord&) const = default;
};

/// is_mets per subject id, as 0/1.
using SubjectLabels = std::map<std::string, int>;

/// Label of each record via its subject; throws DataError for subjects without a label.
std::vector<int> record_labels(std::span<const DailyRecord> records, const SubjectLabels& labels);

}  // namespace metsfuse::cohort
