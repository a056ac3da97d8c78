#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "manifest.hpp"
#include "metsfuse/models/fusion.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json json_file(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

class Cli : public ::testing::Test {
 protected:
  static inline fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / ("metsfuse_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    ASSERT_EQ(run("synth --out " + dir("syn")), 0);
    ASSERT_EQ(run("prepare --data " + dir("syn") + " --out " + dir("prep")), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(root); }

  static std::string dir(const std::string& name) { return (root / name).string(); }

  /// Exit status of the tool; stdout and stderr go to root/last.out and root/last.err.
  static int run(const std::string& args) {
    std::string cmd = std::string(METSFUSE_CLI) + " --frozen-clock " + args + " >" + dir("last.out") + " 2>" +
                      dir("last.err");
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static std::string last_err() { return slurp(root / "last.err"); }
};

TEST_F(Cli, SynthEmitsEverySubject) {
  auto panels = json_file(root / "syn" / "panels.json");
  EXPECT_EQ(panels.size(), 40u);
  EXPECT_TRUE(fs::exists(root / "syn" / "records.jsonl"));
  EXPECT_NO_THROW(metsfuse::cli::verify_directory(root / "syn"));
}

TEST_F(Cli, SynthIsByteIdenticalForTheSameSeed) {
  ASSERT_EQ(run("synth --out " + dir("syn_again")), 0);
  for (const char* f : {"records.jsonl", "panels.json", "records.csv", "cohort_spec.json", "manifest.json"}) {
    EXPECT_EQ(slurp(root / "syn" / f), slurp(root / "syn_again" / f)) << f;
  }
  ASSERT_EQ(run("--seed 9 synth --out " + dir("syn_seed9")), 0);
  EXPECT_NE(slurp(root / "syn" / "records.jsonl"), slurp(root / "syn_seed9" / "records.jsonl"));
}

TEST_F(Cli, MalformedSpecReportsLineAndColumn) {
  std::ofstream(root / "bad_spec.json") << "{\n  \"n_mets\": 8,\n  \"days\": }\n";
  EXPECT_EQ(run("synth --spec " + dir("bad_spec.json") + " --out " + dir("bad_syn")), 1);
  EXPECT_NE(last_err().find("line 3, column"), std::string::npos) << last_err();
}

TEST_F(Cli, PrepareOnCleanInputDropsNothing) {
  EXPECT_EQ(slurp(root / "prep" / "audit.jsonl"), "");
  auto plan = json_file(root / "prep" / "split_plan.json");
  EXPECT_EQ(plan["k"], 3);
  EXPECT_DOUBLE_EQ(plan["test_fraction"].get<double>(), 0.25);
}

TEST_F(Cli, PrepareRerunGivesTheSameSplitPlan) {
  ASSERT_EQ(run("prepare --data " + dir("syn") + " --out " + dir("prep_again")), 0);
  EXPECT_EQ(slurp(root / "prep" / "split_plan.json"), slurp(root / "prep_again" / "split_plan.json"));
  EXPECT_EQ(slurp(root / "prep" / "manifest.json"), slurp(root / "prep_again" / "manifest.json"));
}

TEST_F(Cli, CrossValidationIsReproducible) {
  const std::string common = "cv --epochs 2 --prepared " + dir("prep");
  ASSERT_EQ(run(common + " --out " + dir("cv1")), 0) << last_err();
  ASSERT_EQ(run(common + " --out " + dir("cv2")), 0) << last_err();
  for (const char* f : {"table.csv", "report.json", "history_fold1.csv", "manifest.json"}) {
    EXPECT_EQ(slurp(root / "cv1" / f), slurp(root / "cv2" / f)) << f;
  }
  std::istringstream table(slurp(root / "cv1" / "table.csv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(table, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0].rfind("model,", 0), 0u);
  EXPECT_NE(lines[4].find("Average (Std)"), std::string::npos);
}

TEST_F(Cli, TrainAsTshForcesAlphaOne) {
  ASSERT_EQ(run("train --arch TS_H --epochs 1 --prepared " + dir("prep") + " --out " + dir("tsh")), 0) << last_err();
  auto m = json_file(root / "tsh" / "manifest.json");
  EXPECT_EQ(m["config"]["hyperparams"]["alpha"].get<double>(), 1.0);
  auto model = metsfuse::models::FusionModel::load(root / "tsh" / "model.ckpt");
  EXPECT_EQ(model->hyperparams().alpha, 1.0);
  EXPECT_EQ(model->architecture(), metsfuse::models::Architecture::TsH);
}

TEST_F(Cli, ExplainWritesRankingAndAttributions) {
  ASSERT_EQ(run("train --epochs 1 --prepared " + dir("prep") + " --out " + dir("model")), 0) << last_err();
  ASSERT_EQ(run("explain --pfi --lime --repetitions 3 --samples 100 --prepared " + dir("prep") + " --model " +
                dir("model") + "/model.ckpt --out " + dir("explain")),
            0)
      << last_err();
  auto pfi = json_file(root / "explain" / "pfi.json");
  ASSERT_FALSE(pfi["features"].empty());
  bool has_text = false;
  for (const auto& f : pfi["features"]) has_text |= f["feature"] == "text";
  EXPECT_TRUE(has_text);
  auto csv = slurp(root / "explain" / "pfi.csv");
  EXPECT_EQ(csv.rfind("rank,feature,importance,decline_pct", 0), 0u);
  auto lime = json_file(root / "explain" / "lime.json");
  EXPECT_EQ(lime["record"].get<std::string>().front(), 'M');
  EXPECT_NE(slurp(root / "explain" / "lime.html").find("<span"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("cv --no-such-flag --prepared " + dir("prep") + " --out " + dir("x")), 1);
  EXPECT_EQ(run("cv --arch NOPE --prepared " + dir("prep") + " --out " + dir("x")), 1);
  EXPECT_EQ(run("explain --prepared " + dir("prep") + " --model m.ckpt --out " + dir("x")), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, DigestMismatchIsADataError) {
  fs::copy(root / "prep", root / "prep_tampered", fs::copy_options::recursive);
  std::ofstream(root / "prep_tampered" / "labels.json", std::ios::app) << " ";
  EXPECT_EQ(run("cv --epochs 1 --prepared " + dir("prep_tampered") + " --out " + dir("x")), 2);
  EXPECT_NE(last_err().find("digest mismatch"), std::string::npos) << last_err();
  EXPECT_EQ(run("cv --epochs 1 --prepared " + dir("missing") + " --out " + dir("x")), 2);
}

TEST_F(Cli, DivergenceExitsThree) {
  std::ofstream(root / "diverge.json") << R"({"hyperparams": {"learning_rate": 1e300}})";
  EXPECT_EQ(run("--config " + dir("diverge.json") + " train --epochs 1 --prepared " + dir("prep") + " --out " +
                dir("diverged")),
            3);
  EXPECT_TRUE(fs::exists(root / "diverged" / "manifest.json"));
}

TEST_F(Cli, UnknownConfigKeyIsRejected) {
  std::ofstream(root / "typo.json") << R"({"hyperparam": {}})";
  EXPECT_EQ(run("--config " + dir("typo.json") + " cv --prepared " + dir("prep") + " --out " + dir("x")), 1);
}

}  // namespace
