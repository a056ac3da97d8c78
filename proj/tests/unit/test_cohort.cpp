#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "metsfuse/cohort/augment.hpp"
#include "metsfuse/cohort/clean.hpp"
#include "metsfuse/cohort/features.hpp"
#include "metsfuse/cohort/guard.hpp"
#include "metsfuse/cohort/io.hpp"
#include "metsfuse/cohort/labeler.hpp"
#include "metsfuse/cohort/split.hpp"
#include "metsfuse/cohort/stats.hpp"
#include "metsfuse/error.hpp"
#include "metsfuse/numerics/rng.hpp"
#include "metsfuse/synth/generator.hpp"

using namespace metsfuse;
using namespace metsfuse::cohort;

namespace {

ExamPanel mets_means() {
  ExamPanel p;
  p.subject_id = "M";
  p.bmi = 28.21;
  p.fpg = 6.99;
  p.sbp = 143.88;
  p.dbp = 79.63;
  p.tg = 2.09;
  p.hdl = 1.51;
  p.sex = Sex::Female;
  return p;
}

ExamPanel non_mets_means() {
  ExamPanel p;
  p.subject_id = "N";
  p.bmi = 21.15;
  p.fpg = 5.42;
  p.sbp = 133.72;
  p.dbp = 78.41;
  p.tg = 1.36;
  p.hdl = 1.47;
  p.sex = Sex::Female;
  return p;
}

DailyRecord rec(const std::string& sid, int day, std::optional<double> hr_min, std::string text = "walked") {
  DailyRecord r;
  r.subject_id = sid;
  r.day_index = day;
  r.text = std::move(text);
  r.hr_min = hr_min;
  r.hr_max = 120;
  r.spo2_mean = 97;
  r.steps = 5000;
  return r;
}

// Two-sided permutation p value of |Welch t|.
double permutation_p(std::vector<double> a, std::vector<double> b, int shuffles, std::uint64_t seed) {
  double t0 = std::fabs(welch_t_test(a, b).t);
  std::vector<double> pool(a);
  pool.insert(pool.end(), b.begin(), b.end());
  num::Rng rng(seed);
  int hits = 0;
  for (int s = 0; s < shuffles; ++s) {
    rng.shuffle(pool);
    std::span<const double> x(pool.data(), a.size()), y(pool.data() + a.size(), b.size());
    if (std::fabs(welch_t_test(x, y).t) >= t0 - 1e-12) ++hits;
  }
  return static_cast<double>(hits) / shuffles;
}

synth::SyntheticCohort small_cohort(std::uint64_t seed, int n_mets = 8, int n_non = 12) {
  synth::CohortSpec spec;
  spec.seed = seed;
  spec.n_mets = n_mets;
  spec.n_non_mets = n_non;
  spec.days = 10;
  spec.extra_mets_days = 4;
  return synth::generate(spec);
}

}  // namespace

TEST(Labeler, TableOneGroupMeans) {
  auto m = label_mets(mets_means());
  EXPECT_EQ(m.criteria, (std::array<bool, 4>{true, true, true, true}));
  EXPECT_TRUE(m.is_mets);
  auto n = label_mets(non_mets_means());
  EXPECT_EQ(n.criteria, (std::array<bool, 4>{false, false, false, false}));
  EXPECT_FALSE(n.is_mets);
}

TEST(Labeler, TwoCriteriaIsNotMets) {
  auto p = non_mets_means();
  p.bmi = 26.0;
  p.tg = 1.8;
  auto l = label_mets(p);
  EXPECT_EQ(l.count(), 2);
  EXPECT_FALSE(l.is_mets);
  p.sbp = 140.0;  // threshold is inclusive
  EXPECT_TRUE(label_mets(p).is_mets);
}

TEST(Labeler, AlternativeCriteria) {
  auto p = non_mets_means();
  p.two_hpg = 7.8;
  EXPECT_TRUE(label_mets(p).criteria[MetsLabel::Glycemia]);
  p = non_mets_means();
  p.diagnosed_hypertension = true;
  EXPECT_TRUE(label_mets(p).criteria[MetsLabel::BloodPressure]);
  p = non_mets_means();
  p.hdl = 0.95;
  EXPECT_TRUE(label_mets(p).criteria[MetsLabel::Lipids]);
  p.sex = Sex::Male;
  EXPECT_FALSE(label_mets(p).criteria[MetsLabel::Lipids]);
}

TEST(Labeler, MissingFieldsListed) {
  ExamPanel p;
  p.subject_id = "X";
  p.bmi = 22;
  try {
    label_mets(p);
    FAIL();
  } catch (const DataError& e) {
    std::string msg = e.what();
    for (const char* f : {"fpg", "sbp", "dbp", "tg", "hdl", "sex"}) EXPECT_NE(msg.find(f), std::string::npos) << f;
    EXPECT_EQ(msg.find("bmi"), std::string::npos);
  }
}

TEST(Labeler, MonotoneUnderWorseningPanels) {
  num::Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    ExamPanel p;
    p.subject_id = "R";
    p.bmi = rng.uniform(18, 32);
    p.fpg = rng.uniform(4, 8);
    p.sbp = rng.uniform(110, 160);
    p.dbp = rng.uniform(60, 100);
    p.tg = rng.uniform(0.8, 2.5);
    p.hdl = rng.uniform(0.7, 1.8);
    p.sex = rng.bernoulli(0.5) ? Sex::Male : Sex::Female;
    auto worse = p;
    worse.bmi = *p.bmi + rng.uniform(0, 3);
    worse.fpg = *p.fpg + rng.uniform(0, 1);
    worse.sbp = *p.sbp + rng.uniform(0, 10);
    worse.dbp = std::min(*p.dbp + rng.uniform(0, 10), *worse.sbp - 1);
    worse.dbp = std::max(*worse.dbp, *p.dbp);
    worse.tg = *p.tg + rng.uniform(0, 0.5);
    worse.hdl = *p.hdl - rng.uniform(0, 0.3);
    if (label_mets(p).is_mets) {
      EXPECT_TRUE(label_mets(worse).is_mets);
    }
    EXPECT_GE(label_mets(worse).count(), label_mets(p).count());
  }
}

TEST(Clean, ImputesSubjectMean) {
  std::vector<DailyRecord> in{rec("A", 0, 60), rec("A", 1, std::nullopt), rec("A", 2, 64)};
  auto res = clean(in);
  ASSERT_EQ(res.records.size(), 3u);
  EXPECT_DOUBLE_EQ(*res.records[1].hr_min, 62.0);
  EXPECT_EQ(res.records[1].provenance[PhysioFeature::HrMin], Provenance::Imputed);
  EXPECT_EQ(res.records[0].provenance[PhysioFeature::HrMin], Provenance::Measured);
  ASSERT_EQ(res.audit.size(), 1u);
  EXPECT_EQ(res.audit[0].action, "impute");
  EXPECT_EQ(res.audit[0].field, "hr_min");
}

TEST(Clean, EmptyTextDropped) {
  std::vector<DailyRecord> in{rec("A", 0, 60), rec("A", 1, 61, "  "), rec("A", 2, 62), rec("A", 3, 63)};
  in[3].text.reset();
  auto res = clean(in);
  EXPECT_EQ(res.records.size(), 2u);
  ASSERT_GE(res.audit.size(), 2u);
  EXPECT_EQ(res.audit[0].reason, "missing_text");
  EXPECT_EQ(res.audit[1].reason, "missing_text");
}

TEST(Clean, OutOfRangeDroppedWithReason) {
  std::vector<DailyRecord> in{rec("A", 0, 60), rec("A", 1, 250), rec("A", 2, 62)};
  auto res = clean(in);
  ASSERT_EQ(res.records.size(), 2u);
  ASSERT_EQ(res.audit.size(), 1u);
  EXPECT_EQ(res.audit[0].action, "drop_record");
  EXPECT_EQ(res.audit[0].reason, "range");
  EXPECT_EQ(res.audit[0].field, "hr_min");
  EXPECT_EQ(*res.audit[0].value, 250.0);
}

TEST(Clean, SubjectLosingMajorityRemoved) {
  std::vector<DailyRecord> in{rec("A", 0, 60), rec("A", 1, 250), rec("A", 2, 260), rec("B", 0, 61)};
  auto res = clean(in);
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].subject_id, "B");
  auto it = std::find_if(res.audit.begin(), res.audit.end(), [](const auto& e) { return e.action == "drop_subject"; });
  ASSERT_NE(it, res.audit.end());
  EXPECT_EQ(it->subject_id, "A");
}

TEST(Clean, SubjectWithoutAnyValueForAFieldRemoved) {
  std::vector<DailyRecord> in{rec("A", 0, std::nullopt), rec("A", 1, std::nullopt), rec("B", 0, 61)};
  auto res = clean(in);
  ASSERT_EQ(res.records.size(), 1u);
  auto it = std::find_if(res.audit.begin(), res.audit.end(), [](const auto& e) { return e.reason == "no_valid_values"; });
  ASSERT_NE(it, res.audit.end());
  EXPECT_EQ(it->field, "hr_min");
}

TEST(Clean, UncorruptedSyntheticCohortUntouched) {
  auto c = small_cohort(3);
  auto res = clean(c.records);
  EXPECT_EQ(res.records, c.records);
  EXPECT_TRUE(res.audit.empty());
}

TEST(Welch, IdenticalSamples) {
  std::vector<double> a{1, 2, 3, 4, 5};
  auto r = welch_t_test(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_DOUBLE_EQ(r.p, 1.0);
}

TEST(Welch, DegenerateRejected) {
  std::vector<double> c{2, 2, 2}, a{1, 2, 3};
  EXPECT_THROW(welch_t_test(c, a), NumericError);
  std::vector<double> one{1};
  EXPECT_THROW(welch_t_test(one, a), NumericError);
}

TEST(Welch, WidelySeparatedSamplesAgreeWithPermutation) {
  num::Rng rng(5);
  std::vector<double> a(200), b(200);
  for (auto& v : a) v = rng.normal(0, 1);
  for (auto& v : b) v = rng.normal(5, 1);
  auto r = welch_t_test(a, b);
  EXPECT_LT(r.p, 1e-10);
  // no shuffle reaches the observed statistic
  EXPECT_EQ(permutation_p(a, b, 10000, 6), 0.0);
}

TEST(Welch, MatchesPermutationOracleOnSmallSamples) {
  num::Rng rng(21);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    auto na = 15 + rng.below(16), nb = 15 + rng.below(16);
    double shift = rng.uniform(0.0, 1.0), sd = rng.uniform(0.8, 1.25);
    std::vector<double> a(na), b(nb);
    for (auto& v : a) v = rng.normal(0, 1);
    for (auto& v : b) v = rng.normal(shift, sd);
    double diff = std::fabs(welch_t_test(a, b).p - permutation_p(a, b, 40000, 100 + c));
    worst = std::max(worst, diff);
  }
  EXPECT_LT(worst, 0.01);
}

TEST(Features, SelectionOnSyntheticCohort) {
  synth::CohortSpec spec;
  spec.seed = 1;
  spec.signal = {1.0, 1.0, 1.0, 1.0, 0.0};
  auto c = synth::generate(spec);
  auto labels = label_subjects(c.panels);
  auto y = record_labels(c.records, labels);
  auto fs = select_features(c.records, y, 0.01);
  EXPECT_EQ(fs.features,
            (std::vector<PhysioFeature>{PhysioFeature::HrMin, PhysioFeature::HrMax, PhysioFeature::Steps}));
  auto all = select_features(c.records, y, 1.0);
  EXPECT_EQ(all.features.size(), 4u);
}

TEST(Features, NothingSignificantIsAnError) {
  std::vector<DailyRecord> r;
  std::vector<int> y;
  num::Rng rng(2);
  for (int i = 0; i < 40; ++i) {
    auto d = rec(i % 2 ? "A" : "B", i, rng.normal(60, 5));
    d.hr_max = rng.normal(120, 5);
    d.spo2_mean = rng.normal(97, 1);
    d.steps = rng.normal(5000, 500);
    r.push_back(d);
    y.push_back(i % 2);
  }
  EXPECT_THROW(select_features(r, y, 1e-12), DataError);
  std::vector<int> one_class(r.size(), 1);
  EXPECT_THROW(select_features(r, one_class, 0.01), DataError);
}

TEST(Features, NormalizeWithTrainingStatistics) {
  std::vector<DailyRecord> train{rec("A", 0, 50), rec("A", 1, 70)};
  auto spec = make_feature_spec({PhysioFeature::HrMin});
  EXPECT_THROW(normalize(train, spec), ConfigError);
  fit_normalization(spec, train);
  EXPECT_DOUBLE_EQ(spec.stats[0].mean, 60.0);
  EXPECT_DOUBLE_EQ(spec.stats[0].std, 10.0);
  std::vector<DailyRecord> other{rec("B", 0, 60), rec("B", 1, 70)};
  auto z = normalize(other, spec);
  EXPECT_EQ(z.at(0, 0), 0.0);
  EXPECT_EQ(z.at(1, 0), 1.0);
}

TEST(Features, SpecJsonRoundTrip) {
  auto spec = make_feature_spec({PhysioFeature::Steps, PhysioFeature::HrMin});
  EXPECT_EQ(spec.features.front(), PhysioFeature::HrMin);
  spec.stats = {{60, 5}, {5000, 1000}};
  spec.p_values = {0.001, 0.5, 0.9, 0.002};
  EXPECT_EQ(FeatureSpec::from_json(spec.to_json()), spec);
}

TEST(Augment, CountFormula) {
  EXPECT_EQ(augmentation_count(290, 939, 0.5), 359u);  // 290 + 359 = 649
  EXPECT_EQ(augmentation_count(5, 10, 0.5), 0u);
  EXPECT_EQ(augmentation_count(1, 10, 0.3), 3u);  // 4/13 >= 0.3, 3/12 < 0.3
}

TEST(Augment, ReachesTargetAndKeepsSource) {
  auto c = small_cohort(4);
  auto labels = label_subjects(c.panels);
  auto out = augment(c.records, labels, {0.5, 16, 9}, default_augmenters());
  auto y = record_labels(out, labels);
  std::size_t pos = std::count(y.begin(), y.end(), 1);
  std::size_t orig_pos = 0;
  for (int v : record_labels(c.records, labels)) orig_pos += v;
  std::size_t expected = augmentation_count(orig_pos, c.records.size(), 0.5);
  ASSERT_EQ(out.size(), c.records.size() + expected);
  EXPECT_GE(static_cast<double>(pos) / out.size(), 0.5);
  for (std::size_t i = c.records.size(); i < out.size(); ++i) {
    EXPECT_TRUE(out[i].is_augmented());
    EXPECT_EQ(labels.at(out[i].subject_id), 1);
    auto src = std::find_if(c.records.begin(), c.records.end(), [&](const auto& r) { return r.key() == out[i].key(); });
    ASSERT_NE(src, c.records.end());
    EXPECT_EQ(src->hr_min, out[i].hr_min);
  }
  // deterministic
  EXPECT_EQ(augment(c.records, labels, {0.5, 16, 9}, default_augmenters()), out);
}

TEST(Augment, CurrentRatioLeavesRecordsUnchanged) {
  auto c = small_cohort(4);
  auto labels = label_subjects(c.panels);
  double pos = 0;
  for (int v : record_labels(c.records, labels)) pos += v;
  double ratio = pos / static_cast<double>(c.records.size());
  auto out = augment(c.records, labels, {ratio, 16, 0}, default_augmenters());
  EXPECT_EQ(out, c.records);
}

TEST(Augment, HighRatioWithoutAugmentersRejected) {
  auto c = small_cohort(4);
  auto labels = label_subjects(c.panels);
  EXPECT_THROW(augment(c.records, labels, {0.55, 16, 0}, {}), ConfigError);
}

TEST(Augment, ClauseFilterDropsWeather) {
  ClauseFilter f;
  num::Rng rng(0);
  EXPECT_EQ(f.apply("Walked for 30 minutes. It was raining so stayed mostly indoors. Felt fine.", rng),
            "Walked for 30 minutes. Felt fine.");
  EXPECT_EQ(f.apply("Felt fine.", rng), "Felt fine.");
  EXPECT_EQ(f.apply("Sunny weather.", rng), "Sunny weather.");  // never empties a text
  EXPECT_EQ(f.apply("散步30分钟，天气很热，感觉很好。", rng), "散步30分钟， 感觉很好。");
}

TEST(Augment, RoundTripLexicon) {
  auto lex = RoundTripLexicon::parse("run\tPIV\njog\tPIV\nsofa\tS\n");
  num::Rng rng(1);
  EXPECT_EQ(lex.apply("zebra crossing", rng), "zebra crossing");
  std::set<std::string> seen;
  for (int i = 0; i < 50; ++i) seen.insert(lex.apply("I run daily", rng));
  EXPECT_EQ(seen, (std::set<std::string>{"I run daily", "I jog daily"}));
  EXPECT_EQ(lex.apply("sofa time", rng), "sofa time");
  EXPECT_THROW(RoundTripLexicon::parse("run\n"), DataError);
  EXPECT_THROW(RoundTripLexicon::parse("run\tA\nrun\tB\n"), DataError);
  auto bundled = RoundTripLexicon::bundled();
  EXPECT_GE(bundled.size(), 400u);
  EXPECT_EQ(bundled.pivot("breathless"), bundled.pivot("winded"));
}

TEST(Split, SubjectsNeverShared) {
  auto c = small_cohort(7, 9, 29);
  auto labels = label_subjects(c.panels);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto plan = split(c.records, labels, 0.25, 3, seed);
    std::map<std::string, std::set<int>> parts;
    for (const auto& r : c.records) parts[r.subject_id].insert(plan.partition_of(r));
    EXPECT_EQ(parts.size(), 38u);
    for (const auto& [sid, p] : parts) EXPECT_EQ(p.size(), 1u) << sid;
    std::set<int> used;
    for (const auto& [sid, p] : plan.subjects) used.insert(p);
    EXPECT_EQ(used, (std::set<int>{0, 1, 2, 3}));
    double test = static_cast<double>(plan.select(c.records, {kTestPartition}).size()) / c.records.size();
    EXPECT_NEAR(test, 0.25, 0.08);
  }
}

TEST(Split, DeterministicAndSeedSensitive) {
  auto c = small_cohort(7);
  auto labels = label_subjects(c.panels);
  EXPECT_EQ(split(c.records, labels, 0.25, 3, 5), split(c.records, labels, 0.25, 3, 5));
  EXPECT_NE(split(c.records, labels, 0.25, 3, 5).subjects, split(c.records, labels, 0.25, 3, 6).subjects);
  auto plan = split(c.records, labels, 0.25, 3, 5);
  EXPECT_EQ(SplitPlan::from_json(plan.to_json()), plan);
}

TEST(Split, TooFewSubjectsRejected) {
  auto c = small_cohort(7, 3, 10);
  auto labels = label_subjects(c.panels);
  EXPECT_THROW(split(c.records, labels, 0.25, 3, 0), DataError);
}

TEST(Split, AugmentedRecordsFollowSource) {
  auto c = small_cohort(8);
  auto labels = label_subjects(c.panels);
  auto plan = split(c.records, labels, 0.25, 3, 1);
  auto aug = augment(c.records, labels, {0.5, 16, 2}, default_augmenters());
  for (const auto& r : aug) EXPECT_EQ(plan.partition_of(r), plan.subjects.at(r.subject_id));
  auto rplan = split(c.records, labels, 0.25, 3, 1, SplitMode::Record);
  for (std::size_t i = c.records.size(); i < aug.size(); ++i) {
    EXPECT_EQ(rplan.partition_of(aug[i]), rplan.records.at(aug[i].key()));
  }
}

TEST(Guard, FitsOutsideTrainingRejected) {
  auto c = small_cohort(9);
  auto labels = label_subjects(c.panels);
  auto plan = split(c.records, labels, 0.25, 3, 0);
  TrainingScope scope(plan, training_partitions(plan, 1));
  auto train_idx = plan.select(c.records, scope.partitions());
  std::vector<DailyRecord> train;
  for (auto i : train_idx) train.push_back(c.records[i]);
  EXPECT_NO_THROW(scope.fit_vocabulary(train));
  auto spec = make_feature_spec({PhysioFeature::HrMin});
  EXPECT_NO_THROW(scope.fit_normalization(spec, train));

  std::vector<DailyRecord> with_val = train;
  for (auto i : plan.select(c.records, {1})) with_val.push_back(c.records[i]);
  EXPECT_THROW(scope.fit_vocabulary(with_val), LeakageError);
  EXPECT_THROW(scope.fit_normalization(spec, with_val), LeakageError);
  EXPECT_THROW(scope.select_features(with_val, labels), LeakageError);
  EXPECT_THROW(TrainingScope(plan, {0, 1}), LeakageError);
}

TEST(Io, RecordJsonlRoundTrip) {
  auto c = small_cohort(2);
  c.records[0].hr_min.reset();
  c.records[1].text.reset();
  c.records[2].provenance[PhysioFeature::Steps] = Provenance::Imputed;
  std::stringstream ss;
  write_records_jsonl(ss, c.records);
  EXPECT_EQ(read_records_jsonl(ss), c.records);
}

TEST(Io, MalformedLineReported) {
  std::stringstream ss("{\"subject_id\":\"A\",\"day_index\":0}\n{oops\n");
  try {
    read_records_jsonl(ss, "x.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("x.jsonl:2"), std::string::npos);
  }
  std::stringstream bad("{\"subject_id\":\"A\",\"day_index\":0,\"hr_min\":\"high\"}\n");
  EXPECT_THROW(read_records_jsonl(bad), DataError);
}

TEST(Io, PanelsRoundTripAndCsv) {
  auto c = small_cohort(2);
  auto text = nlohmann::json::array();
  for (const auto& p : c.panels) text.push_back(to_json(p));
  auto back = parse_panels_json(text.dump());
  ASSERT_EQ(back.size(), c.panels.size());
  EXPECT_EQ(to_json(back[3]), to_json(c.panels[3]));
  std::stringstream csv;
  auto labels = label_subjects(c.panels);
  write_records_csv(csv, std::span(c.records).first(2), &labels);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "subject_id,day_index,label,text,hr_min,hr_max,spo2_mean,steps,provenance");
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("M01,0,1,", 0), 0u);
  EXPECT_NE(line.find("text=measured;hr_min=measured"), std::string::npos);
}
