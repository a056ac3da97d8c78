#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace metsfuse::cli {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config;  // empty: defaults
  std::size_t jobs = 1;
  bool frozen_clock = false;
};

struct SynthArgs {
  std::string spec;  // empty: the default cohort
  std::string out;
};

struct PrepareArgs {
  std::string data;  // directory with records.jsonl and panels.json
  std::string out;
};

/// Flags shared by the commands that train models. Unset fields keep the config value.
struct TrainingOverrides {
  std::optional<std::string> arch;
  std::optional<std::size_t> epochs;
};

struct TrainArgs {
  std::string prepared;
  std::string out;
  int fold = 1;  // validation fold; the others train
  TrainingOverrides overrides;
};

struct EvalArgs {
  std::string prepared;
  std::string out;
  TrainingOverrides overrides;
};

struct ExplainArgs {
  std::string prepared;
  std::string model;
  std::string out;
  bool pfi = false;
  bool lime = false;
  std::string record;  // "subject#day"; empty: first test record of a MetS subject
  std::optional<std::size_t> repetitions;
  std::optional<std::size_t> samples;
};

// Each returns the process exit code and throws the library errors for main to map.
int cmd_synth(const GlobalOptions& g, const SynthArgs& a);
int cmd_prepare(const GlobalOptions& g, const PrepareArgs& a);
int cmd_train(const GlobalOptions& g, const TrainArgs& a);
int cmd_cv(const GlobalOptions& g, const EvalArgs& a);
int cmd_grid(const GlobalOptions& g, const EvalArgs& a);
int cmd_sweep(const GlobalOptions& g, const EvalArgs& a);
int cmd_explain(const GlobalOptions& g, const ExplainArgs& a);

/// Parses argv and runs the selected command. Exit codes: 0 success, 1 usage or config,
/// 2 data, 3 numeric failure.
int run(int argc, char** argv);

}  // namespace metsfuse::cli
