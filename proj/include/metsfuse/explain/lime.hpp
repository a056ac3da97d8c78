#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsfuse/cohort/types.hpp"
#include "metsfuse/models/fusion.hpp"

namespace metsfuse::explain {

struct LimeConfig {
  std::size_t samples = 1000;
  double kernel_width = 0.75;
  double ridge = 1e-3;
  std::uint64_t seed = 0;
};

struct TokenWeight {
  std::string token;
  std::size_t begin = 0;  // byte offsets into the original text
  std::size_t end = 0;
  double weight = 0.0;
};

struct TokenExplanation {
  std::string text;
  std::vector<TokenWeight> tokens;  // in text order
  double intercept = 0.0;
  double r2 = 0.0;           // weighted, on the perturbation sample
  double prediction = 0.0;   // classifier output on the full text

  /// Token with the largest weight.
  const TokenWeight& top() const;
  nlohmann::json to_json() const;
  /// The text with every token wrapped in a span shaded by its signed weight.
  std::string to_html() const;
};

/// Positive-class probability for each text.
using TextClassifier = std::function<std::vector<double>(const std::vector<std::string>& texts)>;

/// Local surrogate over token masks. Draws `samples` masks (the first keeps every token,
/// the others keep each token with probability 1/2; a mask that drops everything is drawn
/// again), blanks the dropped tokens, scores the texts and fits a ridge regression with an
/// unpenalized intercept, weighting each mask by exp(-d^2 / width^2) where d is its cosine
/// distance to the full mask. R^2 is 1 when the classifier output does not vary.
TokenExplanation lime_text(const TextClassifier& classify, const std::string& text, const LimeConfig& cfg = {});

/// The model's classifier for one record: the text varies, the physiology stays fixed.
TextClassifier record_classifier(const models::FusionModel& model, const cohort::DailyRecord& record);

}  // namespace metsfuse::explain
