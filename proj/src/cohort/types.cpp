#include "metsfuse/cohort/types.hpp"

#include <fmt/format.h>

#include "metsfuse/error.hpp"

namespace metsfuse::cohort {

void ExamPanel::validate() const {
  std::vector<std::string> missing;
  auto need = [&](const std::optional<double>& v, const char* name) {
    if (!v) missing.emplace_back(name);
  };
  need(bmi, "bmi");
  need(fpg, "fpg");
  need(sbp, "sbp");
  need(dbp, "dbp");
  need(tg, "tg");
  need(hdl, "hdl");
  if (!sex) missing.emplace_back("sex");
  if (!missing.empty()) {
    throw DataError(fmt::format("exam panel {}: missing required fields: {}", subject_id, fmt::join(missing, ", ")));
  }
  for (const auto& [v, name] : {std::pair{bmi, "bmi"}, {fpg, "fpg"}, {two_hpg, "two_hpg"}, {sbp, "sbp"}, {dbp, "dbp"},
                                {tg, "tg"}, {hdl, "hdl"}, {age, "age"}, {height, "height"}, {waist, "waist"}}) {
    if (v && !(*v > 0.0)) throw DataError(fmt::format("exam panel {}: {} must be positive, got {}", subject_id, name, *v));
  }
  if (*dbp >= *sbp) throw DataError(fmt::format("exam panel {}: dbp {} must be below sbp {}", subject_id, *dbp, *sbp));
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Measured: return "measured";
    case Provenance::Imputed: return "imputed";
    case Provenance::Augmented: return "augmented";
  }
  return "measured";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "measured") return Provenance::Measured;
  if (s == "imputed") return Provenance::Imputed;
  if (s == "augmented") return Provenance::Augmented;
  throw DataError(fmt::format("unknown provenance '{}'", s));
}

std::string_view to_string(PhysioFeature f) {
  switch (f) {
    case PhysioFeature::HrMin: return "hr_min";
    case PhysioFeature::HrMax: return "hr_max";
    case PhysioFeature::Spo2Mean: return "spo2_mean";
    case PhysioFeature::Steps: return "steps";
  }
  return "hr_min";
}

PhysioFeature parse_physio_feature(std::string_view s) {
  for (auto f : kAllPhysio) {
    if (to_string(f) == s) return f;
  }
  throw DataError(fmt::format("unknown physiological feature '{}'", s));
}

std::optional<double>& DailyRecord::value(PhysioFeature f) {
  switch (f) {
    case PhysioFeature::HrMin: return hr_min;
    case PhysioFeature::HrMax: return hr_max;
    case PhysioFeature::Spo2Mean: return spo2_mean;
    case PhysioFeature::Steps: return steps;
  }
  return hr_min;
}

const std::optional<double>& DailyRecord::value(PhysioFeature f) const {
  return const_cast<DailyRecord*>(this)->value(f);
}

std::string DailyRecord::key() const { return fmt::format("{}#{}", subject_id, day_index); }

std::vector<int> record_labels(std::span<const DailyRecord> records, const SubjectLabels& labels) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto it = labels.find(r.subject_id);
    if (it == labels.end()) throw DataError("no exam panel / label for subject " + r.subject_id);
    out.push_back(it->second);
  }
  return out;
}

}  // namespace metsfuse::cohort
