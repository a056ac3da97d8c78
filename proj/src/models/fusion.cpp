#include "metsfuse/models/fusion.hpp"

#include <cmath>

#include <fmt/format.h>

#include "metsfuse/error.hpp"

namespace metsfuse::models {

using cohort::PhysioFeature;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

constexpr std::size_t kPredictBatch = 64;

/// [batch, columns] constant from the physio vectors of a batch.
Tensor physio_block(std::span<const Example* const> batch, const std::vector<std::size_t>& columns) {
  Tensor t({batch.size(), columns.size()});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) t.at(i, c) = batch[i]->physio.at(columns[c]);
  }
  return t;
}

}  // namespace

FusionModel::FusionModel(Architecture arch, const HyperParams& hp, cohort::FeatureSpec features,
                         corpus::Vocabulary vocab, const corpus::EncoderConfig& encoder)
    : arch_(arch),
      hp_(effective(arch, hp)),
      features_(std::move(features)),
      vocab_(std::move(vocab)),
      encoder_cfg_(encoder),
      params_(std::make_unique<num::ParameterSet>()) {
  hp_.validate();
  if (features_.features.empty()) throw ConfigError("fusion model needs at least one physiological feature");
  auto col = [&](PhysioFeature f) {
    if (!features_.retains(f)) {
      throw ConfigError(fmt::format("{} needs {} in the feature spec (retained: {})", to_string(arch_), cohort::to_string(f),
                                    features_.to_json()["features"].dump()));
    }
    return features_.column(f);
  };
  const std::size_t d = encoder_cfg_.d_model, r = hp_.reduced_dim, h = hp_.hidden_dim;
  auto rng = num::Rng::derive(hp_.seed, {num::stream_id("init")});
  encoder_ = std::make_unique<corpus::TextEncoder>(*params_, encoder_cfg_, vocab_.size(), rng);

  switch (arch_) {
    case Architecture::Baseline: {
      std::vector<std::size_t> all(features_.features.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      stage_columns_ = {all};
      hidden_.push_back(dense("fusion.hidden0", d + all.size(), h, rng));
      break;
    }
    case Architecture::Thscl:
      stage_columns_ = {{col(PhysioFeature::HrMin), col(PhysioFeature::HrMax), col(PhysioFeature::Steps)}};
      proj_ = dense("fusion.text_proj", d, r, rng);
      hidden_.push_back(dense("fusion.hidden0", r + 3, h, rng));
      break;
    case Architecture::TsHcl:
    case Architecture::TsH:
      stage_columns_ = {{col(PhysioFeature::Steps)}, {col(PhysioFeature::HrMin), col(PhysioFeature::HrMax)}};
      proj_ = dense("fusion.text_proj", d, r, rng);
      hidden_.push_back(dense("fusion.hidden0", r + 1, h, rng));
      hidden_.push_back(dense("fusion.hidden1", h + 2, h, rng));
      break;
    case Architecture::ThScl:
      stage_columns_ = {{col(PhysioFeature::HrMin), col(PhysioFeature::HrMax)}, {col(PhysioFeature::Steps)}};
      proj_ = dense("fusion.text_proj", d, r, rng);
      hidden_.push_back(dense("fusion.hidden0", r + 2, h, rng));
      hidden_.push_back(dense("fusion.hidden1", h + 1, h, rng));
      break;
  }
  head_ = dense("head", h, 2, rng);
}

FusionModel::Dense FusionModel::dense(const std::string& name, std::size_t in, std::size_t out, num::Rng& rng) {
  // Xavier uniform
  double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w({in, out});
  for (auto& v : w.storage()) v = rng.uniform(-limit, limit);
  auto& pw = params_->add(name + ".w", std::move(w));
  auto& pb = params_->add(name + ".b", Tensor({out}, 0.0));
  return {&pw, &pb};
}

Var FusionModel::apply(Tape& tape, const Dense& layer, Var x) const {
  return num::add_bias(num::matmul(x, tape.leaf(*layer.w)), tape.leaf(*layer.b));
}

Var FusionModel::hidden(Tape& tape, const Dense& layer, Var x, num::Mode mode, num::Rng& rng) const {
  return num::dropout(num::relu(apply(tape, layer, x)), hp_.dropout_p, mode, rng);
}

FusionModel::Output FusionModel::forward(Tape& tape, std::span<const Example* const> batch, num::Mode mode,
                                         num::Rng& dropout_rng) const {
  if (batch.empty()) throw ShapeError("FusionModel::forward: empty batch");
  for (const auto* e : batch) {
    if (e->physio.size() != features_.features.size()) {
      throw ShapeError(fmt::format("FusionModel::forward: example has {} physio values, feature spec has {}",
                                   e->physio.size(), features_.features.size()));
    }
  }
  std::vector<const corpus::TokenSequence*> seqs;
  seqs.reserve(batch.size());
  for (const auto* e : batch) seqs.push_back(&e->tokens);
  Var x = encoder_->encode(tape, seqs);
  if (proj_) x = apply(tape, *proj_, x);
  for (std::size_t s = 0; s < hidden_.size(); ++s) {
    Var parts[2] = {x, tape.constant(physio_block(batch, stage_columns_[s]))};
    x = hidden(tape, hidden_[s], num::concat(parts), mode, dropout_rng);
  }
  return {num::softmax(apply(tape, head_, x)), x};
}

std::vector<double> FusionModel::predict(std::span<const Example> examples) const {
  std::vector<double> out;
  out.reserve(examples.size());
  num::Rng unused(0);
  for (std::size_t start = 0; start < examples.size(); start += kPredictBatch) {
    std::size_t n = std::min(kPredictBatch, examples.size() - start);
    std::vector<const Example*> batch;
    for (std::size_t i = 0; i < n; ++i) batch.push_back(&examples[start + i]);
    Tape tape;
    auto o = forward(tape, batch, num::Mode::Eval, unused);
    const auto& p = o.probs.value();
    for (std::size_t i = 0; i < n; ++i) out.push_back(p.at(i, 1));
  }
  return out;
}

std::vector<Example> FusionModel::prepare(std::span<const cohort::DailyRecord> records,
                                          std::span<const int> labels) const {
  if (records.size() != labels.size()) throw ShapeError("prepare: records and labels differ in length");
  if (records.empty()) return {};
  auto z = cohort::normalize(records, features_);
  std::vector<Example> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out[i].tokens = vocab_.encode(records[i].text.value_or(""), encoder_cfg_.max_len);
    out[i].physio.resize(features_.features.size());
    for (std::size_t c = 0; c < out[i].physio.size(); ++c) out[i].physio[c] = z.at(i, c);
    out[i].label = labels[i];
  }
  return out;
}

std::vector<PhysioFeature> FusionModel::required_features(Architecture arch) {
  switch (arch) {
    case Architecture::Baseline: return {};
    case Architecture::Thscl:
    case Architecture::TsHcl:
    case Architecture::ThScl:
    case Architecture::TsH: return {PhysioFeature::HrMin, PhysioFeature::HrMax, PhysioFeature::Steps};
  }
  return {};
}

std::size_t FusionModel::expected_parameter_count(Architecture arch, const HyperParams& hp, std::size_t n_features,
                                                  std::size_t vocab_size, const corpus::EncoderConfig& e) {
  const std::size_t d = e.d_model, f = e.ff_dim, r = hp.reduced_dim, h = hp.hidden_dim;
  std::size_t enc = vocab_size * d + e.max_len * d + 2 * d + e.layers * (4 * (d * d + d) + 2 * d * f + f + d + 4 * d);
  std::size_t proj = d * r + r;
  std::size_t head = 2 * h + 2;
  switch (arch) {
    case Architecture::Baseline: return enc + (d + n_features) * h + h + head;
    case Architecture::Thscl: return enc + proj + (r + 3) * h + h + head;
    case Architecture::TsHcl:
    case Architecture::TsH: return enc + proj + (r + 1) * h + h + (h + 2) * h + h + head;
    case Architecture::ThScl: return enc + proj + (r + 2) * h + h + (h + 1) * h + h + head;
  }
  return 0;
}

num::CheckpointHeader FusionModel::checkpoint_header() const {
  num::CheckpointHeader h;
  h.architecture = std::string(to_string(arch_));
  h.hyperparameters = hp_.to_json();
  h.seed = hp_.seed;
  nlohmann::json enc;
  corpus::to_json(enc, encoder_cfg_);
  h.extra = {{"encoder", enc}, {"feature_spec", features_.to_json()}, {"vocabulary", vocab_.to_tsv()}};
  return h;
}

void FusionModel::save(const std::filesystem::path& path) const { num::write_checkpoint(path, checkpoint_header(), *params_); }

std::unique_ptr<FusionModel> FusionModel::from_checkpoint(const num::Checkpoint& ckpt) {
  const auto& h = ckpt.header;
  try {
    auto arch = parse_architecture(h.architecture);
    auto hp = HyperParams::from_json(h.hyperparameters);
    corpus::EncoderConfig enc;
    corpus::from_json(h.extra.at("encoder"), enc);
    auto spec = cohort::FeatureSpec::from_json(h.extra.at("feature_spec"));
    auto vocab = corpus::Vocabulary::parse_tsv(h.extra.at("vocabulary").get<std::string>());
    auto model = std::make_unique<FusionModel>(arch, hp, std::move(spec), std::move(vocab), enc);
    num::load_parameters(ckpt, model->params());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("checkpoint header is incomplete: {}", e.what()));
  }
}

std::unique_ptr<FusionModel> FusionModel::load(const std::filesystem::path& path) {
  return from_checkpoint(num::read_checkpoint(path));
}

}  // namespace metsfuse::models
