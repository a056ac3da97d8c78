#include "metsfuse/cohort/features.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "metsfuse/cohort/stats.hpp"
#include "metsfuse/error.hpp"
#include "metsfuse/log.hpp"

namespace metsfuse::cohort {

bool FeatureSpec::retains(PhysioFeature f) const {
  return std::find(features.begin(), features.end(), f) != features.end();
}

std::size_t FeatureSpec::column(PhysioFeature f) const {
  auto it = std::find(features.begin(), features.end(), f);
  if (it == features.end()) throw ConfigError(fmt::format("feature {} is not retained", to_string(f)));
  return static_cast<std::size_t>(it - features.begin());
}

nlohmann::json FeatureSpec::to_json() const {
  nlohmann::json j;
  j["features"] = nlohmann::json::array();
  for (std::size_t i = 0; i < features.size(); ++i) {
    nlohmann::json f;
    f["name"] = to_string(features[i]);
    if (fitted()) {
      f["mean"] = stats[i].mean;
      f["std"] = stats[i].std;
    }
    j["features"].push_back(f);
  }
  nlohmann::json p;
  for (auto f : kAllPhysio) p[std::string(to_string(f))] = p_values[static_cast<std::size_t>(f)];
  j["p_values"] = p;
  return j;
}

FeatureSpec FeatureSpec::from_json(const nlohmann::json& j) {
  FeatureSpec s;
  bool with_stats = true;
  for (const auto& f : j.at("features")) {
    s.features.push_back(parse_physio_feature(f.at("name").get<std::string>()));
    if (f.contains("mean") && f.contains("std")) {
      s.stats.push_back({f["mean"].get<double>(), f["std"].get<double>()});
    } else {
      with_stats = false;
    }
  }
  if (!with_stats) s.stats.clear();
  if (auto p = j.find("p_values"); p != j.end()) {
    for (auto f : kAllPhysio) s.p_values[static_cast<std::size_t>(f)] = p->value(std::string(to_string(f)), 1.0);
  }
  return s;
}

FeatureSpec make_feature_spec(std::vector<PhysioFeature> features) {
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  if (features.empty()) throw ConfigError("feature spec needs at least one physiological feature");
  FeatureSpec s;
  s.features = std::move(features);
  return s;
}

FeatureSpec select_features(std::span<const DailyRecord> records, std::span<const int> labels, double alpha) {
  if (records.size() != labels.size()) throw ShapeError("select_features: records and labels differ in length");
  FeatureSpec spec;
  for (auto f : kAllPhysio) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (const auto& v = records[i].value(f)) (labels[i] ? pos : neg).push_back(*v);
    }
    if (pos.empty() || neg.empty()) throw DataError("select_features: both classes must be present");
    double p = 1.0;
    try {
      p = welch_t_test(pos, neg).p;
    } catch (const NumericError& e) {
      logger()->warn("select_features: {} not testable ({}); excluded", to_string(f), e.what());
    }
    spec.p_values[static_cast<std::size_t>(f)] = p;
    if (p < alpha || alpha >= 1.0) spec.features.push_back(f);
  }
  if (spec.features.empty()) {
    throw DataError(fmt::format("select_features: no physiological feature reaches p < {}", alpha));
  }
  return spec;
}

void fit_normalization(FeatureSpec& spec, std::span<const DailyRecord> records) {
  if (spec.features.empty()) throw ConfigError("fit_normalization: spec retains no features");
  if (records.empty()) throw DataError("fit_normalization: no records");
  std::vector<FeatureStats> stats;
  for (auto f : spec.features) {
    double s = 0.0, ss = 0.0;
    for (const auto& r : records) {
      const auto& v = r.value(f);
      if (!v) throw DataError(fmt::format("fit_normalization: {} day {} lacks {}", r.subject_id, r.day_index, to_string(f)));
      s += *v;
    }
    double n = static_cast<double>(records.size());
    double m = s / n;
    for (const auto& r : records) ss += (*r.value(f) - m) * (*r.value(f) - m);
    double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) throw NumericError(fmt::format("fit_normalization: {} has zero spread", to_string(f)));
    stats.push_back({m, sd});
  }
  spec.stats = std::move(stats);
}

num::Tensor normalize(std::span<const DailyRecord> records, const FeatureSpec& spec) {
  if (!spec.fitted()) throw ConfigError("normalize: feature spec has no fitted statistics");
  if (records.empty()) throw DataError("normalize: no records");
  num::Tensor out({records.size(), spec.features.size()});
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t c = 0; c < spec.features.size(); ++c) {
      const auto& v = records[i].value(spec.features[c]);
      if (!v) {
        throw DataError(fmt::format("normalize: {} day {} lacks {}", records[i].subject_id, records[i].day_index,
                                    to_string(spec.features[c])));
      }
      out.at(i, c) = (*v - spec.stats[c].mean) / spec.stats[c].std;
    }
  }
  return out;
}

}  // namespace metsfuse::cohort
