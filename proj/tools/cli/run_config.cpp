#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "metsfuse/error.hpp"
#include "metsfuse/json_fields.hpp"

namespace metsfuse::cli {

namespace {

std::string mode_name(cohort::SplitMode m) { return m == cohort::SplitMode::Subject ? "subject" : "record"; }

cohort::SplitMode parse_mode(const std::string& s) {
  if (s == "subject") return cohort::SplitMode::Subject;
  if (s == "record") return cohort::SplitMode::Record;
  throw ConfigError(fmt::format("config.split.mode: expected \"subject\" or \"record\", got \"{}\"", s));
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  nlohmann::json enc;
  corpus::to_json(enc, encoder);
  nlohmann::json j;
  j["architecture"] = std::string(models::to_string(architecture));
  j["hyperparams"] = hp.to_json();
  j["encoder"] = enc;
  j["clean"] = {{"hr_low", clean.hr_low},         {"hr_high", clean.hr_high},
                {"spo2_low", clean.spo2_low},     {"spo2_high", clean.spo2_high},
                {"steps_high", clean.steps_high}, {"max_drop_fraction", clean.max_drop_fraction}};
  j["split"] = {{"test_fraction", test_fraction}, {"k", k}, {"mode", mode_name(split_mode)}};
  j["augment"] = {{"target_ratio", target_ratio}, {"max_copies_per_source", max_copies_per_source}};
  if (lexicon) j["augment"]["lexicon"] = *lexicon;
  j["features"] = {{"alpha", feature_alpha}};
  j["vocab_max"] = vocab_max;
  j["threshold"] = threshold;
  j["grid"] = grid.to_json();
  j["sweep"] = {{"ratios", sweep_ratios}, {"seeds", sweep_seeds}};
  j["pfi"] = {{"repetitions", pfi_repetitions}, {"features", pfi_features}};
  j["lime"] = {{"samples", lime.samples}, {"kernel_width", lime.kernel_width}, {"ridge", lime.ridge}};
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  std::string arch(models::to_string(c.architecture));
  JsonFields(j, "config")
      .read("architecture", arch)
      .nested("hyperparams", [&](const nlohmann::json& v, const std::string&) { c.hp = models::HyperParams::from_json(v); })
      .nested("encoder", [&](const nlohmann::json& v, const std::string&) { corpus::from_json(v, c.encoder); })
      .nested("clean",
              [&](const nlohmann::json& v, const std::string& ctx) {
                JsonFields(v, ctx)
                    .read("hr_low", c.clean.hr_low)
                    .read("hr_high", c.clean.hr_high)
                    .read("spo2_low", c.clean.spo2_low)
                    .read("spo2_high", c.clean.spo2_high)
                    .read("steps_high", c.clean.steps_high)
                    .read("max_drop_fraction", c.clean.max_drop_fraction)
                    .finish();
              })
      .nested("split",
              [&](const nlohmann::json& v, const std::string& ctx) {
                std::string mode = mode_name(c.split_mode);
                JsonFields(v, ctx).read("test_fraction", c.test_fraction).read("k", c.k).read("mode", mode).finish();
                c.split_mode = parse_mode(mode);
              })
      .nested("augment",
              [&](const nlohmann::json& v, const std::string& ctx) {
                std::string lex;
                JsonFields(v, ctx)
                    .read("target_ratio", c.target_ratio)
                    .read("max_copies_per_source", c.max_copies_per_source)
                    .read("lexicon", lex)
                    .finish();
                if (!lex.empty()) c.lexicon = lex;
              })
      .nested("features",
              [&](const nlohmann::json& v, const std::string& ctx) { JsonFields(v, ctx).read("alpha", c.feature_alpha).finish(); })
      .read("vocab_max", c.vocab_max)
      .read("threshold", c.threshold)
      .nested("grid", [&](const nlohmann::json& v, const std::string&) { c.grid = eval::GridSpec::from_json(v); })
      .nested("sweep",
              [&](const nlohmann::json& v, const std::string& ctx) {
                JsonFields(v, ctx).read("ratios", c.sweep_ratios).read("seeds", c.sweep_seeds).finish();
              })
      .nested("pfi",
              [&](const nlohmann::json& v, const std::string& ctx) {
                JsonFields(v, ctx).read("repetitions", c.pfi_repetitions).read("features", c.pfi_features).finish();
              })
      .nested("lime",
              [&](const nlohmann::json& v, const std::string& ctx) {
                JsonFields(v, ctx)
                    .read("samples", c.lime.samples)
                    .read("kernel_width", c.lime.kernel_width)
                    .read("ridge", c.lime.ridge)
                    .finish();
              })
      .finish();
  c.architecture = models::parse_architecture(arch);
  c.hp.validate();
  return c;
}

RunConfig RunConfig::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read config {}", path));
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  return from_json(j);
}

void RunConfig::set_seed(std::uint64_t seed) {
  hp.seed = seed;
  lime.seed = seed;
}

eval::CvConfig RunConfig::cv_config(std::size_t jobs) const {
  eval::CvConfig cv;
  cv.architecture = architecture;
  cv.hp = hp;
  cv.encoder = encoder;
  cv.target_ratio = target_ratio;
  cv.max_copies_per_source = max_copies_per_source;
  if (lexicon) {
    cv.augmenters = {std::make_shared<cohort::ClauseFilter>(),
                     std::make_shared<cohort::RoundTripLexicon>(cohort::RoundTripLexicon::read(*lexicon))};
  }
  cv.vocab_max = vocab_max;
  cv.feature_alpha = feature_alpha;
  cv.threshold = threshold;
  cv.jobs = jobs;
  return cv;
}

}  // namespace metsfuse::cli
