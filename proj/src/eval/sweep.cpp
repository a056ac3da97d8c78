#include "metsfuse/eval/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "metsfuse/error.hpp"
#include "metsfuse/log.hpp"
#include "metsfuse/parallel.hpp"

namespace metsfuse::eval {

void SweepConfig::validate() const {
  if (ratios.empty()) throw ConfigError("sweep: no ratios");
  if (seeds.empty()) throw ConfigError("sweep: no seeds");
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 0.5)) throw ConfigError(fmt::format("sweep: ratio {} outside (0, 0.5]", r));
  }
  if (k < 2) throw ConfigError("sweep: need at least two folds");
}

std::size_t SweepResult::n_runs() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.report.rotations.size();
  return n;
}

const SweepRow& SweepResult::row(double ratio, const std::string& metric) const {
  for (const auto& r : rows) {
    if (r.ratio == ratio && r.metric == metric) return r;
  }
  throw ConfigError(fmt::format("sweep: no row for ratio {} metric {}", ratio, metric));
}

void SweepResult::write_csv(std::ostream& out) const {
  out << "ratio,metric,mean,ci_low,ci_high,n_runs\n";
  for (const auto& r : rows) {
    out << fmt::format("{:.2f},{},{:.6f},{:.6f},{:.6f},{}\n", r.ratio, r.metric, r.mean, r.ci_low, r.ci_high,
                       r.n_runs);
  }
}

nlohmann::json SweepResult::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"ratio", r.ratio},
                         {"metric", r.metric},
                         {"mean", r.mean},
                         {"ci_low", r.ci_low},
                         {"ci_high", r.ci_high},
                         {"n_runs", r.n_runs}});
  }
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) j["cells"].push_back({{"ratio", c.ratio}, {"seed", c.seed}, {"report", c.report.to_json()}});
  return j;
}

std::vector<SweepRow> summarize(const std::vector<SweepCell>& cells) {
  std::vector<double> ratios;
  for (const auto& c : cells) {
    if (std::find(ratios.begin(), ratios.end(), c.ratio) == ratios.end()) ratios.push_back(c.ratio);
  }
  std::vector<SweepRow> rows;
  for (double ratio : ratios) {
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
      std::vector<double> v;
      for (const auto& c : cells) {
        if (c.ratio != ratio) continue;
        for (const auto& r : c.report.rotations) {
          const double s[] = {r.test.acc, r.test.pre, r.test.rec, r.test.f1, r.test.auroc};
          v.push_back(s[k]);
        }
      }
      SweepRow row;
      row.ratio = ratio;
      row.metric = kMetricNames[k];
      row.n_runs = v.size();
      double sum = 0.0;
      for (double x : v) sum += x;
      row.mean = v.empty() ? 0.0 : sum / static_cast<double>(v.size());
      double half = 0.0;
      if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - row.mean) * (x - row.mean);
        const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        half = 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
      }
      row.ci_low = row.mean - half;
      row.ci_high = row.mean + half;
      rows.push_back(row);
    }
  }
  return rows;
}

SweepResult imbalance_sweep(std::span<const cohort::DailyRecord> records, const cohort::SubjectLabels& labels,
                            const SweepConfig& cfg) {
  cfg.validate();
  std::vector<cohort::SplitPlan> plans;
  for (auto seed : cfg.seeds) plans.push_back(cohort::split(records, labels, cfg.test_fraction, cfg.k, seed, cfg.mode));

  SweepResult out;
  for (double ratio : cfg.ratios) {
    for (auto seed : cfg.seeds) out.cells.push_back(SweepCell{ratio, seed, {}});
  }
  parallel_for(out.cells.size(), cfg.jobs, [&](std::size_t i) {
    auto& cell = out.cells[i];
    CvConfig cv = cfg.cv;
    cv.target_ratio = cell.ratio;
    cv.hp.seed = cell.seed;
    cv.jobs = 1;
    cell.report = cross_validate(records, labels, plans[i % cfg.seeds.size()], cv);
    logger()->info("sweep ratio {:.2f} seed {}: mean test auroc {:.4f}", cell.ratio, cell.seed,
                   cell.report.test.mean[4]);
  });
  out.rows = summarize(out.cells);
  return out;
}

}  // namespace metsfuse::eval
