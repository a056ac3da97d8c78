#include "metsfuse/eval/cross_validate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "metsfuse/cohort/guard.hpp"
#include "metsfuse/error.hpp"
#include "metsfuse/log.hpp"
#include "metsfuse/parallel.hpp"

namespace metsfuse::eval {

using cohort::DailyRecord;

namespace {

std::vector<DailyRecord> pick(std::span<const DailyRecord> records, const std::vector<std::size_t>& idx) {
  std::vector<DailyRecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(records[i]);
  return out;
}

void require_both_classes(std::span<const DailyRecord> records, const cohort::SubjectLabels& labels,
                          const std::string& what) {
  bool pos = false, neg = false;
  for (int y : cohort::record_labels(records, labels)) (y ? pos : neg) = true;
  if (!pos || !neg) throw DataError(fmt::format("{} is missing a class", what));
}

std::array<double, 5> as_array(const Scores& s) { return {s.acc, s.pre, s.rec, s.f1, s.auroc}; }

}  // namespace

namespace {

// Mean taken around the first value, so identical inputs give exactly that value back.
double shifted_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double d = 0.0;
  for (double v : values) d += v - values[0];
  return values[0] + d / static_cast<double>(values.size());
}

}  // namespace

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double m = shifted_mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size()));
}

Aggregate aggregate(std::span<const Scores> scores) {
  Aggregate a;
  for (std::size_t k = 0; k < 5; ++k) {
    std::vector<double> v;
    for (const auto& s : scores) v.push_back(as_array(s)[k]);
    a.mean[k] = shifted_mean(v);
    a.std[k] = population_std(v);
  }
  return a;
}

bool EvalReport::diverged() const {
  for (const auto& r : rotations) {
    if (r.history.diverged) return true;
  }
  return false;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["architecture"] = architecture;
  j["threshold"] = threshold;
  j["features"] = features.to_json();
  j["rotations"] = nlohmann::json::array();
  for (const auto& r : rotations) {
    j["rotations"].push_back({{"validation_fold", r.validation_fold},
                              {"train_folds", r.train_folds},
                              {"n_train", r.n_train},
                              {"n_augmented", r.n_augmented},
                              {"n_val", r.n_val},
                              {"n_test", r.n_test},
                              {"best_epoch", r.history.best_epoch},
                              {"epochs_run", r.history.epochs.size()},
                              {"diverged", r.history.diverged},
                              {"parameter_count", r.parameter_count},
                              {"val", r.val.to_json()},
                              {"test", r.test.to_json()}});
  }
  auto agg = [](const Aggregate& a) {
    nlohmann::json m, s;
    for (std::size_t k = 0; k < 5; ++k) {
      m[kMetricNames[k]] = a.mean[k];
      s[kMetricNames[k]] = a.std[k];
    }
    return nlohmann::json{{"mean", m}, {"std", s}};
  };
  j["test"] = agg(test);
  j["val"] = agg(val);
  return j;
}

void EvalReport::write_table_csv(std::ostream& out) const {
  out << "model,datasets,acc_pct,pre_pct,rec_pct,f1_pct,auroc_pct\n";
  for (const auto& r : rotations) {
    std::string folds;
    for (int f : r.train_folds) folds += (folds.empty() ? "Fold" : ", ") + std::to_string(f);
    auto s = as_array(r.test);
    out << fmt::format("{},\"Train ({}), Val (Fold{})\",{:.1f},{:.1f},{:.1f},{:.1f},{:.1f}\n", architecture, folds,
                       r.validation_fold, 100 * s[0], 100 * s[1], 100 * s[2], 100 * s[3], 100 * s[4]);
  }
  out << architecture << ",Average (Std)";
  for (std::size_t k = 0; k < 5; ++k) out << fmt::format(",{:.1f} ({:.2f})", 100 * test.mean[k], 100 * test.std[k]);
  out << '\n';
}

std::uint64_t rotation_seed(std::uint64_t seed, int validation_fold) {
  return num::Rng::derive(seed, {num::stream_id("rotation"), static_cast<std::uint64_t>(validation_fold)}).next_u64();
}

cohort::FeatureSpec select_on_training(std::span<const DailyRecord> records, const cohort::SubjectLabels& labels,
                                       const cohort::SplitPlan& plan, double alpha) {
  std::set<int> folds;
  for (int f = 1; f <= plan.k; ++f) folds.insert(f);
  cohort::TrainingScope scope(plan, folds);
  std::vector<DailyRecord> originals;
  for (auto i : plan.select(records, folds)) {
    if (!records[i].is_augmented()) originals.push_back(records[i]);
  }
  return scope.select_features(originals, labels, alpha);
}

cohort::FeatureSpec with_required(const cohort::FeatureSpec& selected, models::Architecture arch) {
  auto features = selected.features;
  for (auto f : models::FusionModel::required_features(arch)) {
    if (std::find(features.begin(), features.end(), f) != features.end()) continue;
    logger()->info("{} keeps {} although selection rejected it (p = {:.3g})", models::to_string(arch),
                   cohort::to_string(f), selected.p_values[static_cast<std::size_t>(f)]);
    features.push_back(f);
  }
  if (features.size() == selected.features.size()) return selected;
  auto out = cohort::make_feature_spec(std::move(features));
  out.p_values = selected.p_values;
  return out;
}

RotationData prepare_rotation(std::span<const DailyRecord> records, const cohort::SubjectLabels& labels,
                              const cohort::SplitPlan& plan, int v, const CvConfig& cfg,
                              const cohort::FeatureSpec& selected) {
  auto train_parts = cohort::training_partitions(plan, v);
  cohort::TrainingScope scope(plan, train_parts);
  RotationData d;
  std::vector<DailyRecord> originals;
  for (auto i : plan.select(records, train_parts)) {
    if (!records[i].is_augmented()) originals.push_back(records[i]);
  }
  d.val = pick(records, plan.select(records, {v}));
  d.test = pick(records, plan.select(records, {cohort::kTestPartition}));
  require_both_classes(originals, labels, fmt::format("training folds of rotation {}", v));
  require_both_classes(d.val, labels, fmt::format("validation fold {}", v));
  require_both_classes(d.test, labels, "test partition");

  if (cfg.target_ratio > 0.0) {
    cohort::AugmentConfig ac{cfg.target_ratio, cfg.max_copies_per_source,
                             num::Rng::derive(cfg.hp.seed, {num::stream_id("augment"), static_cast<std::uint64_t>(v)})
                                 .next_u64()};
    d.train = cohort::augment(originals, labels, ac, cfg.augmenters);
  } else {
    d.train = originals;
  }
  d.n_augmented = d.train.size() - originals.size();
  d.vocab = scope.fit_vocabulary(d.train, cfg.vocab_max);
  auto kept = with_required(selected, cfg.architecture);
  d.features = cohort::make_feature_spec(kept.features);
  d.features.p_values = kept.p_values;
  scope.fit_normalization(d.features, originals);
  return d;
}

EvalReport cross_validate(std::span<const DailyRecord> records, const cohort::SubjectLabels& labels,
                          const cohort::SplitPlan& plan, const CvConfig& cfg) {
  if (plan.k < 2) throw ConfigError("cross_validate: the plan needs at least two folds");
  auto selected = with_required(cfg.features ? *cfg.features : select_on_training(records, labels, plan, cfg.feature_alpha),
                                cfg.architecture);

  EvalReport report;
  report.architecture = std::string(models::to_string(cfg.architecture));
  report.threshold = cfg.threshold;
  report.features = selected;
  report.rotations.resize(static_cast<std::size_t>(plan.k));

  parallel_for(report.rotations.size(), cfg.jobs, [&](std::size_t idx) {
    const int v = static_cast<int>(idx) + 1;
    auto data = prepare_rotation(records, labels, plan, v, cfg, selected);
    auto hp = cfg.hp;
    hp.seed = rotation_seed(cfg.hp.seed, v);
    models::FusionModel model(cfg.architecture, hp, data.features, data.vocab, cfg.encoder);
    auto train_ex = model.prepare(data.train, cohort::record_labels(data.train, labels));
    auto val_ex = model.prepare(data.val, cohort::record_labels(data.val, labels));
    auto test_ex = model.prepare(data.test, cohort::record_labels(data.test, labels));

    RotationResult r;
    r.validation_fold = v;
    r.train_folds = cohort::training_partitions(plan, v);
    r.n_train = data.train.size();
    r.n_augmented = data.n_augmented;
    r.n_val = data.val.size();
    r.n_test = data.test.size();
    r.parameter_count = model.parameter_count();
    r.history = models::train(model, train_ex, val_ex);
    std::vector<int> val_y, test_y;
    for (const auto& e : val_ex) val_y.push_back(e.label);
    for (const auto& e : test_ex) test_y.push_back(e.label);
    r.val = evaluate(model.predict(val_ex), val_y, cfg.threshold);
    r.test = evaluate(model.predict(test_ex), test_y, cfg.threshold);
    logger()->info("{} rotation {}: best epoch {} val auroc {:.4f} test auroc {:.4f}", report.architecture, v,
                   r.history.best_epoch, r.val.auroc, r.test.auroc);
    report.rotations[idx] = std::move(r);
  });

  std::vector<Scores> tests, vals;
  for (const auto& r : report.rotations) {
    tests.push_back(r.test);
    vals.push_back(r.val);
  }
  report.test = aggregate(tests);
  report.val = aggregate(vals);
  return report;
}

}  // namespace metsfuse::eval
