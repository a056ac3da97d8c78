#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "metsfuse/cohort/features.hpp"
#include "metsfuse/corpus/text_encoder.hpp"
#include "metsfuse/corpus/vocabulary.hpp"
#include "metsfuse/models/hyperparams.hpp"
#include "metsfuse/numerics/checkpoint.hpp"

namespace metsfuse::models {

/// Model-ready record: token ids plus normalized physiology in FeatureSpec order.
struct Example {
  corpus::TokenSequence tokens;
  std::vector<double> physio;
  int label = 0;
};

/// Text encoder, optional text projection, fusion MLP and a 2-logit head.
///
///   BASELINE  [text, all physio] -> hidden -> head
///   THSCL     [proj(text), hr_min, hr_max, steps] -> hidden -> head
///   TS_HCL    [proj(text), steps] -> hidden -> [., hr_min, hr_max] -> hidden -> head
///   TS_H      as TS_HCL, trained with alpha = 1
///   TH_SCL    [proj(text), hr_min, hr_max] -> hidden -> [., steps] -> hidden -> head
///
/// hidden is linear + relu + dropout; proj is linear to reduced_dim. The representation z
/// used by the contrastive term is the input of the head.
///
/// Parameter count, with encoder width d, ff width f, L layers, vocabulary V, max length T,
/// reduced dim r, hidden dim H and F retained features:
///   encoder  V d + T d + 2 d + L (4 (d^2 + d) + 2 d f + f + d + 4 d)
///   proj     d r + r                       (absent in BASELINE)
///   BASELINE (d + F) H + H
///   THSCL    (r + 3) H + H
///   TS_HCL   (r + 1) H + H + (H + 2) H + H  (TS_H identical)
///   TH_SCL   (r + 2) H + H + (H + 1) H + H
///   head     2 H + 2
class FusionModel {
 public:
  FusionModel(Architecture arch, const HyperParams& hp, cohort::FeatureSpec features, corpus::Vocabulary vocab,
              const corpus::EncoderConfig& encoder = {});

  FusionModel(const FusionModel&) = delete;
  FusionModel& operator=(const FusionModel&) = delete;

  struct Output {
    num::Var probs;  // [batch, 2] after softmax
    num::Var z;      // [batch, hidden]
  };
  Output forward(num::Tape& tape, std::span<const Example* const> batch, num::Mode mode, num::Rng& dropout_rng) const;

  /// Eval-mode positive-class probabilities.
  std::vector<double> predict(std::span<const Example> examples) const;

  /// Tokenizes and normalizes records with this model's vocabulary and feature spec.
  std::vector<Example> prepare(std::span<const cohort::DailyRecord> records, std::span<const int> labels) const;

  Architecture architecture() const noexcept { return arch_; }
  const HyperParams& hyperparams() const noexcept { return hp_; }
  const cohort::FeatureSpec& feature_spec() const noexcept { return features_; }
  const corpus::Vocabulary& vocabulary() const noexcept { return vocab_; }
  const corpus::EncoderConfig& encoder_config() const noexcept { return encoder_cfg_; }
  num::ParameterSet& params() noexcept { return *params_; }
  const num::ParameterSet& params() const noexcept { return *params_; }

  std::size_t parameter_count() const { return params_->scalar_count(); }
  /// Physiological inputs wired into the architecture, in canonical order.
  static std::vector<cohort::PhysioFeature> required_features(Architecture arch);
  static std::size_t expected_parameter_count(Architecture arch, const HyperParams& hp, std::size_t n_features,
                                              std::size_t vocab_size, const corpus::EncoderConfig& encoder);

  num::CheckpointHeader checkpoint_header() const;
  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<FusionModel> load(const std::filesystem::path& path);
  static std::unique_ptr<FusionModel> from_checkpoint(const num::Checkpoint& ckpt);

 private:
  struct Dense {
    num::Parameter* w;
    num::Parameter* b;
  };
  Dense dense(const std::string& name, std::size_t in, std::size_t out, num::Rng& rng);
  num::Var apply(num::Tape& tape, const Dense& layer, num::Var x) const;
  num::Var hidden(num::Tape& tape, const Dense& layer, num::Var x, num::Mode mode, num::Rng& rng) const;

  Architecture arch_;
  HyperParams hp_;
  cohort::FeatureSpec features_;
  corpus::Vocabulary vocab_;
  corpus::EncoderConfig encoder_cfg_;
  std::unique_ptr<num::ParameterSet> params_;
  std::unique_ptr<corpus::TextEncoder> encoder_;
  std::optional<Dense> proj_;
  std::vector<Dense> hidden_;
  Dense head_{};
  // physio columns entering each fusion stage
  std::vector<std::vector<std::size_t>> stage_columns_;
};

}  // namespace metsfuse::models
