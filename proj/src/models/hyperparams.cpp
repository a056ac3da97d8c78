#include "metsfuse/models/hyperparams.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

#include "metsfuse/error.hpp"
#include "metsfuse/json_fields.hpp"

namespace metsfuse::models {

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::Baseline: return "BASELINE";
    case Architecture::Thscl: return "THSCL";
    case Architecture::TsHcl: return "TS_HCL";
    case Architecture::ThScl: return "TH_SCL";
    case Architecture::TsH: return "TS_H";
  }
  return "BASELINE";
}

Architecture parse_architecture(std::string_view s) {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (auto a : {Architecture::Baseline, Architecture::Thscl, Architecture::TsHcl, Architecture::ThScl,
                 Architecture::TsH}) {
    if (to_string(a) == up) return a;
  }
  throw ConfigError(fmt::format("unknown architecture '{}' (expected BASELINE, THSCL, TS_HCL, TH_SCL or TS_H)", s));
}

bool ce_only(Architecture a) { return a == Architecture::TsH || a == Architecture::Baseline; }

void HyperParams::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("hyperparameters: " + m); };
  if (reduced_dim == 0 || hidden_dim == 0) fail("reduced_dim and hidden_dim must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail(fmt::format("dropout_p {} outside [0, 1)", dropout_p));
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(fmt::format("alpha {} outside [0, 1]", alpha));
  if (!(epsilon_margin > 0.0)) fail("epsilon_margin must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (batch_size == 0 || max_epochs == 0) fail("batch_size and max_epochs must be positive");
  if (alpha < 1.0 && batch_size < 2) fail("batch_size must be at least 2 when alpha < 1");
}

nlohmann::json HyperParams::to_json() const {
  return {{"reduced_dim", reduced_dim},
          {"hidden_dim", hidden_dim},
          {"dropout_p", dropout_p},
          {"alpha", alpha},
          {"epsilon_margin", epsilon_margin},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"seed", seed},
          {"classical_contrastive", classical_contrastive}};
}

HyperParams HyperParams::from_json(const nlohmann::json& j) { return from_json(j, HyperParams{}); }

HyperParams HyperParams::from_json(const nlohmann::json& j, HyperParams hp) {
  JsonFields(j, "hyperparameters")
      .read("reduced_dim", hp.reduced_dim)
      .read("hidden_dim", hp.hidden_dim)
      .read("dropout_p", hp.dropout_p)
      .read("alpha", hp.alpha)
      .read("epsilon_margin", hp.epsilon_margin)
      .read("learning_rate", hp.learning_rate)
      .read("weight_decay", hp.weight_decay)
      .read("batch_size", hp.batch_size)
      .read("max_epochs", hp.max_epochs)
      .read("patience", hp.patience)
      .read("seed", hp.seed)
      .read("classical_contrastive", hp.classical_contrastive)
      .finish();
  hp.validate();
  return hp;
}

HyperParams effective(Architecture a, HyperParams hp) {
  if (ce_only(a)) hp.alpha = 1.0;
  return hp;
}

}  // namespace metsfuse::models
