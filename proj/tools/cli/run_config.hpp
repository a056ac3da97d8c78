#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsfuse/cohort/clean.hpp"
#include "metsfuse/cohort/split.hpp"
#include "metsfuse/eval/cross_validate.hpp"
#include "metsfuse/eval/grid_search.hpp"
#include "metsfuse/eval/sweep.hpp"
#include "metsfuse/explain/lime.hpp"
#include "metsfuse/explain/pfi.hpp"

namespace metsfuse::cli {

/// Everything a command can be configured with. Read from --config, then overridden by flags.
struct RunConfig {
  models::Architecture architecture = models::Architecture::TsHcl;
  models::HyperParams hp;
  corpus::EncoderConfig encoder;
  cohort::CleanConfig clean;
  double test_fraction = 0.25;
  int k = 3;
  cohort::SplitMode split_mode = cohort::SplitMode::Subject;
  double target_ratio = 0.5;
  std::size_t max_copies_per_source = 16;
  std::optional<std::string> lexicon;  // TSV path replacing the bundled lexicon
  double feature_alpha = 0.01;
  std::size_t vocab_max = 2048;
  double threshold = 0.5;
  eval::GridSpec grid;
  std::vector<double> sweep_ratios{0.30, 0.35, 0.40, 0.45, 0.50};
  std::vector<std::uint64_t> sweep_seeds{0, 1, 2};
  std::size_t pfi_repetitions = 50;
  std::vector<std::string> pfi_features;
  explain::LimeConfig lime;

  nlohmann::json to_json() const;
  /// Unknown keys are rejected; missing keys keep defaults.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig read(const std::string& path);

  /// Seed for every random stream of a run.
  void set_seed(std::uint64_t seed);
  eval::CvConfig cv_config(std::size_t jobs) const;
};

}  // namespace metsfuse::cli
