#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace metsfuse::models {

enum class Architecture { Baseline, Thscl, TsHcl, ThScl, TsH };

std::string_view to_string(Architecture a);
/// Accepts "BASELINE", "THSCL", "TS_HCL", "TH_SCL", "TS_H" (case-insensitive).
Architecture parse_architecture(std::string_view s);
/// True for architectures trained with cross-entropy only (TS_H and BASELINE).
bool ce_only(Architecture a);

struct HyperParams {
  std::size_t reduced_dim = 3;
  std::size_t hidden_dim = 32;
  double dropout_p = 0.3;
  double alpha = 0.7;
  double epsilon_margin = 0.5;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  /// max(0, eps - d)^2 on the distance instead of max(0, eps - d^2) on its square.
  bool classical_contrastive = false;

  /// Throws ConfigError when out of range.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep defaults; unknown keys are rejected.
  static HyperParams from_json(const nlohmann::json& j);
  static HyperParams from_json(const nlohmann::json& j, HyperParams base);
  bool operator==(const HyperParams&) const = default;
};

/// Hyperparameters as trained: alpha is forced to 1 for CE-only architectures.
HyperParams effective(Architecture a, HyperParams hp);

}  // namespace metsfuse::models
