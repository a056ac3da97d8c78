#include "metsfuse/cohort/clean.hpp"

#include <map>
#include <set>

#include "metsfuse/log.hpp"

namespace metsfuse::cohort {
namespace {

bool blank(const std::optional<std::string>& t) {
  return !t || t->find_first_not_of(" \t\r\n") == std::string::npos;
}

bool in_range(PhysioFeature f, double v, const CleanConfig& c) {
  switch (f) {
    case PhysioFeature::HrMin:
    case PhysioFeature::HrMax: return v >= c.hr_low && v <= c.hr_high;
    case PhysioFeature::Spo2Mean: return v >= c.spo2_low && v <= c.spo2_high;
    case PhysioFeature::Steps: return v >= 0.0 && v <= c.steps_high;
  }
  return false;
}

}  // namespace

CleanResult clean(std::span<const DailyRecord> records, const CleanConfig& cfg) {
  CleanResult res;
  auto& audit = res.audit;
  std::vector<bool> keep(records.size(), true);
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // subject -> (total, dropped)

  auto drop = [&](std::size_t i, std::string field, std::string reason, std::optional<double> value) {
    keep[i] = false;
    audit.push_back({"drop_record", records[i].subject_id, records[i].day_index, std::move(field), std::move(reason),
                     value});
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ++tally[r.subject_id].first;
    if (blank(r.text)) {
      drop(i, "text", "missing_text", std::nullopt);
    } else {
      for (auto f : kAllPhysio) {
        const auto& v = r.value(f);
        if (v && !in_range(f, *v, cfg)) {
          drop(i, std::string(to_string(f)), "range", *v);
          break;
        }
      }
      if (keep[i] && r.hr_min && r.hr_max && *r.hr_min > *r.hr_max) drop(i, "hr_min", "order", *r.hr_min);
    }
    if (!keep[i]) ++tally[r.subject_id].second;
  }

  std::set<std::string> removed;
  for (const auto& [sid, t] : tally) {
    double frac = static_cast<double>(t.second) / static_cast<double>(t.first);
    if (frac > cfg.max_drop_fraction) {
      removed.insert(sid);
      audit.push_back({"drop_subject", sid, std::nullopt, "", "too_many_dropped", frac});
    }
  }

  // subject means over surviving records, per field
  std::map<std::string, std::array<std::pair<double, std::size_t>, 4>> sums;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!keep[i] || removed.count(records[i].subject_id)) continue;
    auto& s = sums[records[i].subject_id];
    for (auto f : kAllPhysio) {
      if (const auto& v = records[i].value(f)) {
        s[static_cast<std::size_t>(f)].first += *v;
        s[static_cast<std::size_t>(f)].second += 1;
      }
    }
  }
  for (const auto& [sid, s] : sums) {
    for (auto f : kAllPhysio) {
      if (s[static_cast<std::size_t>(f)].second == 0) {
        removed.insert(sid);
        audit.push_back({"drop_subject", sid, std::nullopt, std::string(to_string(f)), "no_valid_values",
                         std::nullopt});
        break;
      }
    }
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!keep[i] || removed.count(records[i].subject_id)) continue;
    DailyRecord r = records[i];
    const auto& s = sums.at(r.subject_id);
    for (auto f : kAllPhysio) {
      auto& v = r.value(f);
      if (v) continue;
      const auto& [total, n] = s[static_cast<std::size_t>(f)];
      v = total / static_cast<double>(n);
      r.provenance[f] = Provenance::Imputed;
      audit.push_back({"impute", r.subject_id, r.day_index, std::string(to_string(f)), "subject_mean", *v});
    }
    if (*r.hr_min > *r.hr_max) {
      // only reachable through imputation
      audit.push_back({"drop_record", r.subject_id, r.day_index, "hr_min", "order", *r.hr_min});
      continue;
    }
    res.records.push_back(std::move(r));
  }
  logger()->info("clean: {} of {} records kept, {} audit entries", res.records.size(), records.size(), audit.size());
  return res;
}

}  // namespace metsfuse::cohort
