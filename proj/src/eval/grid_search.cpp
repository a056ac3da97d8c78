#include "metsfuse/eval/grid_search.hpp"

#include <algorithm>
#include <ostream>

#include <fmt/format.h>

#include "metsfuse/error.hpp"
#include "metsfuse/json_fields.hpp"
#include "metsfuse/log.hpp"
#include "metsfuse/parallel.hpp"

namespace metsfuse::eval {

nlohmann::json GridSpec::to_json() const {
  nlohmann::json arch = nlohmann::json::array();
  for (auto a : architectures) arch.push_back(std::string(models::to_string(a)));
  return {{"architectures", arch}, {"reduced_dims", reduced_dims}, {"hidden_dims", hidden_dims}, {"dropouts", dropouts}};
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
  GridSpec g;
  std::vector<std::string> arch;
  for (auto a : g.architectures) arch.emplace_back(models::to_string(a));
  JsonFields(j, "grid")
      .read("architectures", arch)
      .read("reduced_dims", g.reduced_dims)
      .read("hidden_dims", g.hidden_dims)
      .read("dropouts", g.dropouts)
      .finish();
  g.architectures.clear();
  for (const auto& a : arch) g.architectures.push_back(models::parse_architecture(a));
  return g;
}

std::vector<Trial> rank_trials(std::vector<Trial> trials) {
  std::stable_sort(trials.begin(), trials.end(), [](const Trial& a, const Trial& b) {
    if (a.mean_val_auroc() != b.mean_val_auroc()) return a.mean_val_auroc() > b.mean_val_auroc();
    if (a.parameter_count != b.parameter_count) return a.parameter_count < b.parameter_count;
    return a.index < b.index;
  });
  return trials;
}

void GridResult::write_csv(std::ostream& out) const {
  out << "rank,architecture,reduced_dim,hidden_dim,dropout_p,parameter_count,mean_val_auroc,std_val_auroc,"
         "mean_test_auroc,std_test_auroc,diverged\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    out << fmt::format("{},{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", i + 1, models::to_string(t.architecture),
                       t.reduced_dim, t.hidden_dim, t.dropout_p, t.parameter_count, t.val.mean[4], t.val.std[4],
                       t.test.mean[4], t.test.std[4], t.diverged ? "true" : "false");
  }
}

nlohmann::json GridResult::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    j.push_back({{"rank", i + 1},
                 {"architecture", std::string(models::to_string(t.architecture))},
                 {"reduced_dim", t.reduced_dim},
                 {"hidden_dim", t.hidden_dim},
                 {"dropout_p", t.dropout_p},
                 {"parameter_count", t.parameter_count},
                 {"val_auroc", t.val_auroc},
                 {"mean_val_auroc", t.val.mean[4]},
                 {"std_val_auroc", t.val.std[4]},
                 {"mean_test_auroc", t.test.mean[4]},
                 {"std_test_auroc", t.test.std[4]},
                 {"diverged", t.diverged}});
  }
  return {{"trials", j}};
}

GridResult grid_search(std::span<const cohort::DailyRecord> records, const cohort::SubjectLabels& labels,
                       const cohort::SplitPlan& plan, const GridSpec& grid, const CvConfig& base) {
  if (grid.size() == 0) throw ConfigError("grid_search: the grid is empty");
  CvConfig cfg = base;
  if (!cfg.features) cfg.features = select_on_training(records, labels, plan, cfg.feature_alpha);
  cfg.jobs = 1;

  std::vector<Trial> trials;
  for (auto a : grid.architectures) {
    for (auto r : grid.reduced_dims) {
      for (auto h : grid.hidden_dims) {
        for (auto p : grid.dropouts) {
          Trial t;
          t.index = trials.size();
          t.architecture = a;
          t.reduced_dim = r;
          t.hidden_dim = h;
          t.dropout_p = p;
          trials.push_back(t);
        }
      }
    }
  }
  parallel_for(trials.size(), base.jobs, [&](std::size_t i) {
    auto& t = trials[i];
    CvConfig c = cfg;
    c.architecture = t.architecture;
    c.hp.reduced_dim = t.reduced_dim;
    c.hp.hidden_dim = t.hidden_dim;
    c.hp.dropout_p = t.dropout_p;
    auto report = cross_validate(records, labels, plan, c);
    t.parameter_count = report.rotations.front().parameter_count;
    for (const auto& r : report.rotations) {
      t.val_auroc.push_back(r.val.auroc);
      // vocabularies differ per rotation; report the largest model
      t.parameter_count = std::max(t.parameter_count, r.parameter_count);
    }
    t.val = report.val;
    t.test = report.test;
    t.diverged = report.diverged();
    logger()->info("grid {} r={} h={} p={}: mean val auroc {:.4f}", models::to_string(t.architecture), t.reduced_dim,
                   t.hidden_dim, t.dropout_p, t.val.mean[4]);
  });
  return GridResult{rank_trials(std::move(trials))};
}

}  // namespace metsfuse::eval
