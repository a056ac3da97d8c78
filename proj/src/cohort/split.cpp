#include "metsfuse/cohort/split.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "metsfuse/error.hpp"
#include "metsfuse/numerics/rng.hpp"

namespace metsfuse::cohort {
namespace {

struct Unit {
  std::string id;
  std::size_t weight;  // record count
};

/// Picks test units from a shuffled list, then deals the rest into k folds.
void assign(std::vector<Unit> units, double test_fraction, int k, std::size_t min_test,
            std::map<std::string, int>& out) {
  std::size_t total = 0;
  for (const auto& u : units) total += u.weight;
  double target = test_fraction * static_cast<double>(total);
  std::size_t max_test = units.size() - static_cast<std::size_t>(k);
  std::vector<bool> in_test(units.size(), false);
  double taken = 0.0;
  std::size_t n_test = 0;
  for (std::size_t i = 0; i < units.size() && n_test < max_test; ++i) {
    double with = taken + static_cast<double>(units[i].weight);
    if (n_test < min_test || std::fabs(with - target) < std::fabs(taken - target)) {
      in_test[i] = true;
      taken = with;
      ++n_test;
    }
  }
  std::vector<std::size_t> fold_load(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (in_test[i]) {
      out[units[i].id] = kTestPartition;
      continue;
    }
    auto f = static_cast<std::size_t>(std::min_element(fold_load.begin(), fold_load.end()) - fold_load.begin());
    fold_load[f] += units[i].weight;
    out[units[i].id] = static_cast<int>(f) + 1;
  }
}

}  // namespace

int SplitPlan::partition_of(const DailyRecord& r) const {
  if (mode == SplitMode::Subject) {
    auto it = subjects.find(r.subject_id);
    if (it == subjects.end()) throw DataError("subject " + r.subject_id + " is not in the split plan");
    return it->second;
  }
  auto it = records.find(r.key());
  if (it == records.end()) throw DataError("record " + r.key() + " is not in the split plan");
  return it->second;
}

std::vector<std::size_t> SplitPlan::select(std::span<const DailyRecord> recs, const std::set<int>& partitions) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (partitions.count(partition_of(recs[i]))) out.push_back(i);
  }
  return out;
}

std::vector<std::string> SplitPlan::test_record_ids(std::span<const DailyRecord> recs) const {
  std::vector<std::string> out;
  for (auto i : select(recs, {kTestPartition})) out.push_back(recs[i].key());
  return out;
}

nlohmann::json SplitPlan::to_json() const {
  nlohmann::json j;
  j["mode"] = mode == SplitMode::Subject ? "subject" : "record";
  j["k"] = k;
  j["test_fraction"] = test_fraction;
  j["seed"] = seed;
  j["subjects"] = subjects;
  j["records"] = records;
  return j;
}

SplitPlan SplitPlan::from_json(const nlohmann::json& j) {
  SplitPlan p;
  auto mode = j.at("mode").get<std::string>();
  if (mode != "subject" && mode != "record") throw DataError("split plan mode must be subject or record");
  p.mode = mode == "subject" ? SplitMode::Subject : SplitMode::Record;
  p.k = j.at("k").get<int>();
  p.test_fraction = j.at("test_fraction").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.subjects = j.at("subjects").get<std::map<std::string, int>>();
  p.records = j.value("records", std::map<std::string, int>{});
  return p;
}

SplitPlan split(std::span<const DailyRecord> records, const SubjectLabels& labels, double test_fraction, int k,
                std::uint64_t seed, SplitMode mode) {
  if (k < 2) throw ConfigError(fmt::format("split: k must be at least 2, got {}", k));
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError(fmt::format("split: test_fraction must be in [0, 1), got {}", test_fraction));
  }
  SplitPlan plan;
  plan.mode = mode;
  plan.k = k;
  plan.test_fraction = test_fraction;
  plan.seed = seed;

  // subjects and record keys per class, in first-seen order before shuffling
  std::array<std::vector<Unit>, 2> subj, recs;
  std::map<std::string, std::size_t> subj_index;
  std::set<std::string> seen_keys;
  for (const auto& r : records) {
    auto lab = labels.find(r.subject_id);
    if (lab == labels.end()) throw DataError("split: no label for subject " + r.subject_id);
    auto c = static_cast<std::size_t>(lab->second != 0);
    auto [it, fresh] = subj_index.emplace(r.subject_id, subj[c].size());
    if (fresh) subj[c].push_back({r.subject_id, 0});
    if (r.is_augmented()) continue;
    subj[c][it->second].weight += 1;
    if (seen_keys.insert(r.key()).second) recs[c].push_back({r.key(), 1});
  }
  for (std::size_t c = 0; c < 2; ++c) {
    if (subj[c].size() < static_cast<std::size_t>(k) + 1) {
      throw DataError(fmt::format("split: class {} has {} subjects; need at least k+1 = {}", c, subj[c].size(), k + 1));
    }
  }

  std::size_t min_test = test_fraction > 0.0 ? 1 : 0;
  for (std::size_t c = 0; c < 2; ++c) {
    auto rng = num::Rng::derive(seed, {num::stream_id("split"), c});
    if (mode == SplitMode::Subject) {
      rng.shuffle(subj[c]);
      assign(subj[c], test_fraction, k, min_test, plan.subjects);
    } else {
      rng.shuffle(recs[c]);
      if (recs[c].size() < static_cast<std::size_t>(k) + 1) throw DataError("split: too few records per class");
      assign(recs[c], test_fraction, k, min_test, plan.records);
    }
  }
  if (mode == SplitMode::Record) {
    // subjects map still lists every subject, with the partition of its first record
    for (const auto& r : records) plan.subjects.emplace(r.subject_id, plan.records.at(r.key()));
  }
  return plan;
}

std::set<int> training_partitions(const SplitPlan& plan, int validation_fold) {
  if (validation_fold < 1 || validation_fold > plan.k) {
    throw ConfigError(fmt::format("validation fold {} outside 1..{}", validation_fold, plan.k));
  }
  std::set<int> out;
  for (int f = 1; f <= plan.k; ++f) {
    if (f != validation_fold) out.insert(f);
  }
  return out;
}

}  // namespace metsfuse::cohort
