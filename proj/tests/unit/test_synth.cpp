#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "metsfuse/cohort/clean.hpp"
#include "metsfuse/cohort/labeler.hpp"
#include "metsfuse/error.hpp"
#include "metsfuse/synth/generator.hpp"

using namespace metsfuse;
using namespace metsfuse::synth;

namespace {

bool has_negative_sensation(const std::string& text, const CohortSpec& spec) {
  for (const auto& s : spec.lexicon.negative_sensations) {
    std::string cap = s;
    cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
    if (text.find(cap) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(Synth, DefaultCohortShape) {
  CohortSpec spec;
  auto c = generate(spec);
  ASSERT_EQ(c.panels.size(), 40u);
  int mets = 0;
  for (const auto& p : c.panels) {
    auto l = cohort::label_mets(p);
    if (p.subject_id[0] == 'M') {
      EXPECT_TRUE(l.is_mets);
      EXPECT_GE(l.count(), 3);
      ++mets;
    } else {
      EXPECT_FALSE(l.is_mets);
    }
  }
  EXPECT_EQ(mets, 8);
  EXPECT_EQ(c.records.size(), 8u * 38 + 32u * 28);
  for (const auto& r : c.records) {
    EXPECT_LE(*r.hr_min, *r.hr_max);
    EXPECT_GE(*r.spo2_mean, 50.0);
    EXPECT_LE(*r.spo2_mean, 100.0);
    EXPECT_GE(*r.steps, 0.0);
  }
}

TEST(Synth, DeterministicPerSeed) {
  CohortSpec spec;
  spec.seed = 3;
  auto a = generate(spec), b = generate(spec);
  EXPECT_EQ(a.records, b.records);
  spec.seed = 4;
  auto c = generate(spec);
  EXPECT_NE(a.records, c.records);
  EXPECT_EQ(a.records.size(), c.records.size());
}

TEST(Synth, ZeroTextSignalMatchesSensationRates) {
  CohortSpec spec;
  spec.signal.text = 0.0;
  spec.n_mets = 200;
  spec.n_non_mets = 200;
  auto c = generate(spec);
  std::map<char, std::pair<double, double>> freq;
  for (const auto& r : c.records) {
    auto& f = freq[r.subject_id[0]];
    f.first += has_negative_sensation(*r.text, spec);
    f.second += 1;
  }
  double pm = freq['M'].first / freq['M'].second, pn = freq['N'].first / freq['N'].second;
  EXPECT_NEAR(pm, spec.p_negative_base, 0.02);
  EXPECT_NEAR(pn, spec.p_negative_base, 0.02);
  // full text signal separates the groups
  spec.signal.text = 1.0;
  auto d = generate(spec);
  double neg = 0, n = 0;
  for (const auto& r : d.records) {
    if (r.subject_id[0] != 'M') continue;
    neg += has_negative_sensation(*r.text, spec);
    n += 1;
  }
  EXPECT_NEAR(neg / n, spec.p_negative_max, 0.02);
}

TEST(Synth, GroupMeansConverge) {
  CohortSpec spec;
  spec.n_mets = 500;
  spec.n_non_mets = 500;
  spec.seed = 12;
  auto c = generate(spec);
  std::map<char, std::array<double, 4>> sum;
  std::map<char, double> n;
  for (const auto& r : c.records) {
    auto& s = sum[r.subject_id[0]];
    s[0] += *r.hr_min;
    s[1] += *r.hr_max;
    s[2] += 100.0 - *r.spo2_mean;
    s[3] += *r.steps;
    n[r.subject_id[0]] += 1;
  }
  auto target = [&](const PhysioDist& p, double sig, bool mets) {
    return mets ? p.non_mets.mean + sig * (p.mets.mean - p.non_mets.mean) : p.non_mets.mean;
  };
  for (bool mets : {true, false}) {
    char g = mets ? 'M' : 'N';
    const auto& s = sum[g];
    EXPECT_NEAR(s[0] / n[g], target(spec.hr_min, spec.signal.hr_min, mets), 0.03 * target(spec.hr_min, 1, mets));
    EXPECT_NEAR(s[1] / n[g], target(spec.hr_max, spec.signal.hr_max, mets), 0.03 * target(spec.hr_max, 1, mets));
    EXPECT_NEAR(s[2] / n[g], target(spec.spo2_deficit, spec.signal.spo2, mets), 0.03 * 3.0);
    EXPECT_NEAR(s[3] / n[g], target(spec.steps, spec.signal.steps, mets),
                0.03 * target(spec.steps, spec.signal.steps, mets));
  }
}

TEST(Synth, CorruptionKnobFeedsCleaning) {
  CohortSpec spec;
  spec.corruption = {0.05, 0.03, 0.02};
  auto c = generate(spec);
  auto res = cohort::clean(c.records);
  EXPECT_LT(res.records.size(), c.records.size());
  int ranges = 0, imputes = 0, texts = 0;
  for (const auto& e : res.audit) {
    ranges += e.reason == "range";
    imputes += e.action == "impute";
    texts += e.reason == "missing_text";
  }
  EXPECT_GT(ranges, 0);
  EXPECT_GT(imputes, 0);
  EXPECT_GT(texts, 0);
}

TEST(Synth, SpecJson) {
  CohortSpec spec;
  spec.seed = 77;
  spec.signal.hr_max = 0.1;
  EXPECT_EQ(CohortSpec::from_json(spec.to_json()), spec);
  auto partial = CohortSpec::parse(R"({"n_mets": 5, "signal": {"text": 0.5}})");
  EXPECT_EQ(partial.n_mets, 5);
  EXPECT_EQ(partial.signal.text, 0.5);
  EXPECT_EQ(partial.signal.hr_min, 0.6);
  EXPECT_THROW(CohortSpec::parse(R"({"n_mets": 5, "bogus": 1})"), ConfigError);
  try {
    CohortSpec::parse("{\n  \"n_mets\": 5,\n  \"days\" 3\n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Synth, InfeasibleSpecRejected) {
  CohortSpec spec;
  spec.mets_panel.bmi = {20, 0.01};
  spec.mets_panel.fpg = {5, 0.01};
  spec.mets_panel.sbp = {120, 0.01};
  spec.mets_panel.tg = {1.0, 0.01};
  EXPECT_THROW(generate(spec), ConfigError);
  spec = CohortSpec{};
  spec.signal.text = 1.5;
  EXPECT_THROW(generate(spec), ConfigError);
}
