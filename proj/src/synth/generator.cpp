#include "metsfuse/synth/generator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "metsfuse/cohort/labeler.hpp"
#include "metsfuse/error.hpp"
#include "metsfuse/json_fields.hpp"
#include "metsfuse/numerics/rng.hpp"

namespace metsfuse::synth {
namespace {

using nlohmann::json;
using cohort::DailyRecord;
using cohort::ExamPanel;

constexpr int kMaxPanelAttempts = 10000;

double lognormal(num::Rng& rng, const Dist& d) {
  double s2 = std::log1p(d.cv * d.cv);
  return std::exp(std::log(d.mean) - 0.5 * s2 + std::sqrt(s2) * rng.normal());
}

Dist blend(const Dist& a, const Dist& b, double s) { return {a.mean + s * (b.mean - a.mean), a.cv + s * (b.cv - a.cv)}; }

/// Lognormal draws for one subject: a fixed subject offset plus daily noise.
class SubjectSeries {
 public:
  SubjectSeries(const Dist& d, double share, num::Rng& rng) {
    double s2 = std::log1p(d.cv * d.cv);
    mu_ = std::log(d.mean) - 0.5 * s2;
    day_sd_ = std::sqrt((1.0 - share) * s2);
    offset_ = std::sqrt(share * s2) * rng.normal();
  }
  double draw(num::Rng& rng) const { return std::exp(mu_ + offset_ + day_sd_ * rng.normal()); }

 private:
  double mu_, day_sd_, offset_;
};

std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

const std::string& pick(const std::vector<std::string>& v, num::Rng& rng) {
  return v[static_cast<std::size_t>(rng.below(v.size()))];
}

json dist_json(const Dist& d) { return {{"mean", d.mean}, {"cv", d.cv}}; }

void read_dist(const json& j, const std::string& ctx, Dist& d) {
  JsonFields(j, ctx).read("mean", d.mean).read("cv", d.cv).finish();
}

json physio_json(const PhysioDist& p) {
  return {{"non_mets", dist_json(p.non_mets)}, {"mets", dist_json(p.mets)}, {"subject_share", p.subject_share}};
}

void read_physio(const json& j, const std::string& ctx, PhysioDist& p) {
  JsonFields(j, ctx)
      .nested("non_mets", [&](const json& x, const std::string& c) { read_dist(x, c, p.non_mets); })
      .nested("mets", [&](const json& x, const std::string& c) { read_dist(x, c, p.mets); })
      .read("subject_share", p.subject_share)
      .finish();
}

json panel_json(const PanelDists& p) {
  return {{"bmi", dist_json(p.bmi)},       {"fpg", dist_json(p.fpg)},     {"sbp", dist_json(p.sbp)},
          {"dbp", dist_json(p.dbp)},       {"tg", dist_json(p.tg)},       {"hdl", dist_json(p.hdl)},
          {"age", dist_json(p.age)},       {"height", dist_json(p.height)}, {"waist", dist_json(p.waist)},
          {"male_fraction", p.male_fraction}};
}

void read_panel(const json& j, const std::string& ctx, PanelDists& p) {
  JsonFields f(j, ctx);
  for (auto [key, d] : {std::pair{"bmi", &p.bmi}, {"fpg", &p.fpg}, {"sbp", &p.sbp}, {"dbp", &p.dbp}, {"tg", &p.tg},
                        {"hdl", &p.hdl}, {"age", &p.age}, {"height", &p.height}, {"waist", &p.waist}}) {
    f.nested(key, [d = d](const json& x, const std::string& c) { read_dist(x, c, *d); });
  }
  f.read("male_fraction", p.male_fraction).finish();
}

PanelDists table_means(double bmi, double fpg, double sbp, double dbp, double tg, double hdl, double age, double height,
                       double waist, double male) {
  PanelDists p;
  p.bmi = {bmi, 0.10};
  p.fpg = {fpg, 0.10};
  p.sbp = {sbp, 0.10};
  p.dbp = {dbp, 0.10};
  p.tg = {tg, 0.10};
  p.hdl = {hdl, 0.10};
  p.age = {age, 0.10};
  p.height = {height, 0.10};
  p.waist = {waist, 0.10};
  p.male_fraction = male;
  return p;
}

ExamPanel draw_panel(const std::string& id, const PanelDists& d, bool want_mets, num::Rng& rng) {
  for (int attempt = 0; attempt < kMaxPanelAttempts; ++attempt) {
    ExamPanel p;
    p.subject_id = id;
    p.bmi = lognormal(rng, d.bmi);
    p.fpg = lognormal(rng, d.fpg);
    p.sbp = lognormal(rng, d.sbp);
    p.dbp = lognormal(rng, d.dbp);
    p.tg = lognormal(rng, d.tg);
    p.hdl = lognormal(rng, d.hdl);
    p.age = lognormal(rng, d.age);
    p.height = lognormal(rng, d.height);
    p.waist = lognormal(rng, d.waist);
    p.sex = rng.bernoulli(d.male_fraction) ? cohort::Sex::Male : cohort::Sex::Female;
    if (*p.dbp >= *p.sbp) continue;
    if (cohort::label_mets(p).is_mets == want_mets) return p;
  }
  throw ConfigError(fmt::format("synth: could not draw a {} exam panel for {} in {} attempts; the panel "
                                "distributions cannot produce that group",
                                want_mets ? "MetS" : "non-MetS", id, kMaxPanelAttempts));
}

double clamp_round(double v, double lo, double hi, double step) {
  return std::clamp(std::round(v / step) * step, lo, hi);
}

}  // namespace

CohortSpec::CohortSpec() {
  mets_panel = table_means(28.21, 6.99, 143.88, 79.63, 2.09, 1.51, 74.88, 157.44, 94.83, 0.125);
  non_mets_panel = table_means(21.15, 5.42, 133.72, 78.41, 1.36, 1.47, 72.19, 160.13, 80.28, 0.10);
  mets_panel.height.cv = non_mets_panel.height.cv = 0.05;
  mets_panel.age.cv = non_mets_panel.age.cv = 0.08;
  hr_min = {{60.0, 0.155}, {68.0, 0.091}, 0.3};
  hr_max = {{125.0, 0.10}, {112.0, 0.10}, 0.3};
  spo2_deficit = {{3.0, 0.4}, {4.0, 0.4}, 0.0};
  steps = {{6500.0, 0.35}, {4500.0, 0.35}, 0.3};
  lexicon.active_activities = {"went jogging in the park",     "played badminton with friends",
                               "rode a bike to the market",    "climbed the hill behind the house",
                               "took a brisk walk along the river", "practiced tai chi with the neighbors",
                               "did squats and pushups at the gym", "danced with the group in the square"};
  lexicon.light_activities = {"did some housework at home",    "took a slow walk after dinner",
                              "did gentle stretching at home", "sat and rested most of the day",
                              "walked slowly around the garden", "did a little gardening"};
  lexicon.positive_sensations = {"felt relaxed and energetic afterwards", "felt good with no discomfort",
                                 "legs felt light and comfortable",      "slight sweating but felt fine",
                                 "breathing was easy the whole time",    "felt refreshed and happy"};
  lexicon.negative_sensations = {"felt breathless and had to stop",          "was out of breath and tired quickly",
                                 "heart was pounding and chest felt tight",  "felt dizzy and exhausted afterwards",
                                 "severe panting after a short distance",    "knees ached and legs felt heavy"};
  lexicon.confounders = {"it was raining so stayed mostly indoors", "the weather was hot and humid",
                         "cold wind in the morning",                "sunny and pleasant weather today",
                         "cloudy and a bit chilly"};
}

void CohortSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("cohort spec: " + m); };
  if (n_mets < 1 || n_non_mets < 1) fail("n_mets and n_non_mets must be positive");
  if (days < 1 || extra_mets_days < 0) fail("days must be positive and extra_mets_days non-negative");
  for (double s : {signal.text, signal.hr_min, signal.hr_max, signal.steps, signal.spo2}) {
    if (!(s >= 0.0 && s <= 1.0)) fail("signal strengths must lie in [0, 1]");
  }
  for (double p : {p_negative_base, p_negative_max, p_light_base, p_light_max, p_confounder, corruption.missing_rate,
                   corruption.outlier_rate, corruption.missing_text_rate}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must lie in [0, 1]");
  }
  auto check_dist = [&](const Dist& d) {
    if (!(d.mean > 0.0) || !(d.cv >= 0.0)) fail("distributions need mean > 0 and cv >= 0");
  };
  for (const auto* p : {&hr_min, &hr_max, &spo2_deficit, &steps}) {
    check_dist(p->non_mets);
    check_dist(p->mets);
    if (!(p->subject_share >= 0.0 && p->subject_share <= 1.0)) fail("subject_share must lie in [0, 1]");
  }
  for (const auto* p : {&mets_panel, &non_mets_panel}) {
    for (const auto* d : {&p->bmi, &p->fpg, &p->sbp, &p->dbp, &p->tg, &p->hdl, &p->age, &p->height, &p->waist}) {
      check_dist(*d);
    }
  }
  const auto& l = lexicon;
  if (l.active_activities.empty() || l.light_activities.empty() || l.positive_sensations.empty() ||
      l.negative_sensations.empty() || l.confounders.empty()) {
    fail("every lexicon list needs at least one entry");
  }
  if (l.min_minutes < 1 || l.max_minutes < l.min_minutes) fail("minutes range is empty");
}

json CohortSpec::to_json() const {
  json j;
  j["n_mets"] = n_mets;
  j["n_non_mets"] = n_non_mets;
  j["days"] = days;
  j["extra_mets_days"] = extra_mets_days;
  j["seed"] = seed;
  j["signal"] = {{"text", signal.text},
                 {"hr_min", signal.hr_min},
                 {"hr_max", signal.hr_max},
                 {"steps", signal.steps},
                 {"spo2", signal.spo2}};
  j["mets_panel"] = panel_json(mets_panel);
  j["non_mets_panel"] = panel_json(non_mets_panel);
  j["physiology"] = {{"hr_min", physio_json(hr_min)},
                     {"hr_max", physio_json(hr_max)},
                     {"spo2_deficit", physio_json(spo2_deficit)},
                     {"steps", physio_json(steps)}};
  j["lexicon"] = {{"active_activities", lexicon.active_activities},
                  {"light_activities", lexicon.light_activities},
                  {"positive_sensations", lexicon.positive_sensations},
                  {"negative_sensations", lexicon.negative_sensations},
                  {"confounders", lexicon.confounders},
                  {"min_minutes", lexicon.min_minutes},
                  {"max_minutes", lexicon.max_minutes}};
  j["text"] = {{"p_negative_base", p_negative_base},
               {"p_negative_max", p_negative_max},
               {"p_light_base", p_light_base},
               {"p_light_max", p_light_max},
               {"p_confounder", p_confounder}};
  j["corruption"] = {{"missing_rate", corruption.missing_rate},
                     {"outlier_rate", corruption.outlier_rate},
                     {"missing_text_rate", corruption.missing_text_rate}};
  return j;
}

CohortSpec CohortSpec::from_json(const json& j) {
  CohortSpec s;
  JsonFields(j, "spec")
      .read("n_mets", s.n_mets)
      .read("n_non_mets", s.n_non_mets)
      .read("days", s.days)
      .read("extra_mets_days", s.extra_mets_days)
      .read("seed", s.seed)
      .nested("signal",
              [&](const json& x, const std::string& c) {
                JsonFields(x, c)
                    .read("text", s.signal.text)
                    .read("hr_min", s.signal.hr_min)
                    .read("hr_max", s.signal.hr_max)
                    .read("steps", s.signal.steps)
                    .read("spo2", s.signal.spo2)
                    .finish();
              })
      .nested("mets_panel", [&](const json& x, const std::string& c) { read_panel(x, c, s.mets_panel); })
      .nested("non_mets_panel", [&](const json& x, const std::string& c) { read_panel(x, c, s.non_mets_panel); })
      .nested("physiology",
              [&](const json& x, const std::string& c) {
                JsonFields(x, c)
                    .nested("hr_min", [&](const json& y, const std::string& d) { read_physio(y, d, s.hr_min); })
                    .nested("hr_max", [&](const json& y, const std::string& d) { read_physio(y, d, s.hr_max); })
                    .nested("spo2_deficit",
                            [&](const json& y, const std::string& d) { read_physio(y, d, s.spo2_deficit); })
                    .nested("steps", [&](const json& y, const std::string& d) { read_physio(y, d, s.steps); })
                    .finish();
              })
      .nested("lexicon",
              [&](const json& x, const std::string& c) {
                JsonFields(x, c)
                    .read("active_activities", s.lexicon.active_activities)
                    .read("light_activities", s.lexicon.light_activities)
                    .read("positive_sensations", s.lexicon.positive_sensations)
                    .read("negative_sensations", s.lexicon.negative_sensations)
                    .read("confounders", s.lexicon.confounders)
                    .read("min_minutes", s.lexicon.min_minutes)
                    .read("max_minutes", s.lexicon.max_minutes)
                    .finish();
              })
      .nested("text",
              [&](const json& x, const std::string& c) {
                JsonFields(x, c)
                    .read("p_negative_base", s.p_negative_base)
                    .read("p_negative_max", s.p_negative_max)
                    .read("p_light_base", s.p_light_base)
                    .read("p_light_max", s.p_light_max)
                    .read("p_confounder", s.p_confounder)
                    .finish();
              })
      .nested("corruption",
              [&](const json& x, const std::string& c) {
                JsonFields(x, c)
                    .read("missing_rate", s.corruption.missing_rate)
                    .read("outlier_rate", s.corruption.outlier_rate)
                    .read("missing_text_rate", s.corruption.missing_text_rate)
                    .finish();
              })
      .finish();
  s.validate();
  return s;
}

CohortSpec CohortSpec::parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; translate it to line and column
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(fmt::format("cohort spec: syntax error at line {}, column {}: {}", line, col, e.what()));
  }
  return from_json(j);
}

SyntheticCohort generate(const CohortSpec& spec) {
  spec.validate();
  SyntheticCohort out;
  const int n_total = spec.n_mets + spec.n_non_mets;
  for (int s = 0; s < n_total; ++s) {
    const bool mets = s < spec.n_mets;
    const auto idx = static_cast<std::uint64_t>(s);
    std::string id = mets ? fmt::format("M{:02d}", s + 1) : fmt::format("N{:02d}", s - spec.n_mets + 1);

    auto panel_rng = num::Rng::derive(spec.seed, {num::stream_id("panel"), idx});
    out.panels.push_back(draw_panel(id, mets ? spec.mets_panel : spec.non_mets_panel, mets, panel_rng));

    auto group = [&](const PhysioDist& p, double signal) {
      return mets ? blend(p.non_mets, p.mets, signal) : p.non_mets;
    };
    auto physio_rng = num::Rng::derive(spec.seed, {num::stream_id("physio"), idx});
    SubjectSeries hr_lo(group(spec.hr_min, spec.signal.hr_min), spec.hr_min.subject_share, physio_rng);
    SubjectSeries hr_hi(group(spec.hr_max, spec.signal.hr_max), spec.hr_max.subject_share, physio_rng);
    SubjectSeries deficit(group(spec.spo2_deficit, spec.signal.spo2), spec.spo2_deficit.subject_share, physio_rng);
    SubjectSeries walk(group(spec.steps, spec.signal.steps), spec.steps.subject_share, physio_rng);

    auto text_rng = num::Rng::derive(spec.seed, {num::stream_id("text"), idx});
    auto corrupt_rng = num::Rng::derive(spec.seed, {num::stream_id("corrupt"), idx});
    double shift = mets ? spec.signal.text : 0.0;
    double p_neg = spec.p_negative_base + shift * (spec.p_negative_max - spec.p_negative_base);
    double p_light = spec.p_light_base + shift * (spec.p_light_max - spec.p_light_base);

    const int n_days = spec.days + (mets ? spec.extra_mets_days : 0);
    for (int d = 0; d < n_days; ++d) {
      DailyRecord r;
      r.subject_id = id;
      r.day_index = d;
      double a = clamp_round(hr_lo.draw(physio_rng), 30.0, 220.0, 1.0);
      double b = clamp_round(hr_hi.draw(physio_rng), 30.0, 220.0, 1.0);
      r.hr_min = std::min(a, b);
      r.hr_max = std::max(a, b);
      r.spo2_mean = clamp_round(100.0 - deficit.draw(physio_rng), 50.0, 100.0, 0.1);
      r.steps = clamp_round(walk.draw(physio_rng), 0.0, 100000.0, 1.0);

      const auto& lex = spec.lexicon;
      const auto& activity = pick(text_rng.bernoulli(p_light) ? lex.light_activities : lex.active_activities, text_rng);
      int span = (lex.max_minutes - lex.min_minutes) / 5;
      int minutes = lex.min_minutes + 5 * static_cast<int>(text_rng.below(static_cast<std::uint64_t>(span) + 1));
      const auto& sensation =
          pick(text_rng.bernoulli(p_neg) ? lex.negative_sensations : lex.positive_sensations, text_rng);
      std::string text = fmt::format("{} for {} minutes. {}.", capitalized(activity), minutes, capitalized(sensation));
      if (text_rng.bernoulli(spec.p_confounder)) text += fmt::format(" {}.", capitalized(pick(lex.confounders, text_rng)));
      r.text = std::move(text);

      const auto& c = spec.corruption;
      if (c.missing_text_rate > 0.0 && corrupt_rng.bernoulli(c.missing_text_rate)) r.text.reset();
      if (c.missing_rate > 0.0) {
        for (auto f : cohort::kAllPhysio) {
          if (corrupt_rng.bernoulli(c.missing_rate)) r.value(f).reset();
        }
      }
      if (c.outlier_rate > 0.0 && corrupt_rng.bernoulli(c.outlier_rate)) {
        static constexpr std::array<double, 4> bad{250.0, 260.0, 40.0, 150000.0};
        auto f = cohort::kAllPhysio[static_cast<std::size_t>(corrupt_rng.below(4))];
        r.value(f) = bad[static_cast<std::size_t>(f)];
      }
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace metsfuse::synth
