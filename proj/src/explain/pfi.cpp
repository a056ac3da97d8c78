#include "metsfuse/explain/pfi.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "metsfuse/error.hpp"
#include "metsfuse/eval/metrics.hpp"
#include "metsfuse/parallel.hpp"

namespace metsfuse::explain {

namespace {

// Taken around the first value so that k identical AUROCs average to exactly that value.
double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x - v[0];
  return v[0] + s / static_cast<double>(v.size());
}

}  // namespace

double PfiReport::identity_error() const {
  double worst = 0.0;
  for (const auto& f : features) worst = std::max(worst, std::abs(f.importance - (baseline_auroc - mean(f.permuted_auroc))));
  return worst;
}

const FeatureImportance& PfiReport::get(const std::string& feature) const {
  for (const auto& f : features) {
    if (f.feature == feature) return f;
  }
  throw ConfigError(fmt::format("pfi report has no feature '{}'", feature));
}

nlohmann::json PfiReport::to_json() const {
  nlohmann::json j;
  j["baseline_auroc"] = baseline_auroc;
  j["repetitions"] = repetitions;
  j["seed"] = seed;
  j["features"] = nlohmann::json::array();
  for (const auto& f : features) {
    j["features"].push_back({{"feature", f.feature}, {"importance", f.importance}, {"permuted_auroc", f.permuted_auroc}});
  }
  return j;
}

void PfiReport::write_csv(std::ostream& out) const {
  out << "rank,feature,importance,decline_pct,baseline_auroc,mean_permuted_auroc\n";
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    out << fmt::format("{},{},{:.6f},{:.2f},{:.6f},{:.6f}\n", i + 1, f.feature, f.importance,
                       100.0 * f.importance / baseline_auroc, baseline_auroc, mean(f.permuted_auroc));
  }
}

PfiReport pfi(const models::FusionModel& model, std::span<const cohort::DailyRecord> records,
              std::span<const int> labels, const PfiConfig& cfg) {
  if (records.size() < 10) throw DataError(fmt::format("pfi: needs at least 10 records, got {}", records.size()));
  if (cfg.repetitions == 0) throw ConfigError("pfi: repetitions must be at least 1");
  std::vector<std::string> names = cfg.features;
  if (names.empty()) {
    names.emplace_back(kTextFeature);
    for (auto f : model.feature_spec().features) names.emplace_back(cohort::to_string(f));
  }
  // column in Example::physio, -1 for text, -2 for a feature the model does not read
  std::vector<int> columns;
  for (const auto& n : names) {
    if (n == kTextFeature) {
      columns.push_back(-1);
      continue;
    }
    cohort::PhysioFeature f;
    try {
      f = cohort::parse_physio_feature(n);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("pfi: unknown feature '{}'", n));
    }
    const auto& spec = model.feature_spec();
    columns.push_back(spec.retains(f) ? static_cast<int>(spec.column(f)) : -2);
  }

  const auto base = model.prepare(records, labels);
  PfiReport report;
  report.repetitions = cfg.repetitions;
  report.seed = cfg.seed;
  report.baseline_auroc = eval::auroc(model.predict(base), labels);

  std::vector<FeatureImportance> out(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    out[i].feature = names[i];
    out[i].permuted_auroc.assign(cfg.repetitions, 0.0);
  }
  parallel_for(names.size() * cfg.repetitions, cfg.jobs, [&](std::size_t task) {
    const std::size_t fi = task / cfg.repetitions;
    const std::size_t r = task % cfg.repetitions;
    auto rng = num::Rng::derive(cfg.seed, {num::stream_id("pfi"), num::stream_id(names[fi]), r});
    auto perm = rng.permutation(base.size());
    auto shuffled = base;
    const int col = columns[fi];
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (col == -1) {
        shuffled[i].tokens = base[perm[i]].tokens;
      } else if (col >= 0) {
        shuffled[i].physio[static_cast<std::size_t>(col)] = base[perm[i]].physio[static_cast<std::size_t>(col)];
      }
    }
    out[fi].permuted_auroc[r] = eval::auroc(model.predict(shuffled), labels);
  });
  for (auto& f : out) f.importance = report.baseline_auroc - mean(f.permuted_auroc);
  std::stable_sort(out.begin(), out.end(),
                   [](const FeatureImportance& a, const FeatureImportance& b) { return a.importance > b.importance; });
  report.features = std::move(out);
  return report;
}

}  // namespace metsfuse::explain
