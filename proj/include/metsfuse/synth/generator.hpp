#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsfuse/cohort/types.hpp"

namespace metsfuse::synth {

/// Mean and coefficient of variation of a lognormal quantity.
struct Dist {
  double mean = 1.0;
  double cv = 0.1;
  bool operator==(const Dist&) const = default;
};

/// Daily physiology for one feature: the non-MetS distribution and the MetS distribution at
/// full signal. With signal s the MetS parameters are non_mets + s * (mets - non_mets).
/// `subject_share` is the fraction of log-variance shared by all days of one subject.
struct PhysioDist {
  Dist non_mets;
  Dist mets;
  double subject_share = 0.3;
  bool operator==(const PhysioDist&) const = default;
};

struct PanelDists {
  Dist bmi, fpg, sbp, dbp, tg, hdl, age, height, waist;
  double male_fraction = 0.1;
  bool operator==(const PanelDists&) const = default;
};

struct TextLexicon {
  std::vector<std::string> active_activities;
  std::vector<std::string> light_activities;
  std::vector<std::string> positive_sensations;
  std::vector<std::string> negative_sensations;
  std::vector<std::string> confounders;
  int min_minutes = 10;
  int max_minutes = 90;
  bool operator==(const TextLexicon&) const = default;
};

struct Signal {
  double text = 0.9;
  double hr_min = 0.6;
  double hr_max = 0.3;
  double steps = 0.3;
  double spo2 = 0.0;
  bool operator==(const Signal&) const = default;
};

struct Corruption {
  double missing_rate = 0.0;       // per physiological field
  double outlier_rate = 0.0;       // per record, one field pushed out of range
  double missing_text_rate = 0.0;  // per record
  bool operator==(const Corruption&) const = default;
};

struct CohortSpec {
  int n_mets = 8;
  int n_non_mets = 32;
  int days = 28;
  int extra_mets_days = 10;
  std::uint64_t seed = 0;
  Signal signal;
  PanelDists mets_panel;
  PanelDists non_mets_panel;
  PhysioDist hr_min, hr_max, spo2_deficit, steps;  // spo2_mean = 100 - deficit
  TextLexicon lexicon;
  double p_negative_base = 0.2;
  double p_negative_max = 0.95;
  double p_light_base = 0.3;
  double p_light_max = 0.9;
  double p_confounder = 0.3;
  Corruption corruption;

  CohortSpec();

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static CohortSpec from_json(const nlohmann::json& j);
  /// Parses JSON text; syntax errors report line and column.
  static CohortSpec parse(const std::string& text);
  bool operator==(const CohortSpec&) const = default;
};

struct SyntheticCohort {
  std::vector<cohort::ExamPanel> panels;
  std::vector<cohort::DailyRecord> records;
};

/// Deterministic given spec.seed. Subject ids are "M01".. for MetS and "N01".. for non-MetS.
SyntheticCohort generate(const CohortSpec& spec);

}  // namespace metsfuse::synth
