#include "metsfuse/corpus/text_encoder.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "metsfuse/error.hpp"
#include "metsfuse/log.hpp"

namespace metsfuse::corpus {

using num::Parameter;
using num::ParameterSet;
using num::Tape;
using num::Tensor;
using num::Var;

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"d_model", c.d_model}, {"heads", c.heads},       {"layers", c.layers}, {"ff_dim", c.ff_dim},
       {"max_len", c.max_len}, {"pooling", c.pooling == Pooling::Mean ? "mean" : "cls"}, {"ln_eps", c.ln_eps}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.layers = j.value("layers", c.layers);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.max_len = j.value("max_len", c.max_len);
  c.ln_eps = j.value("ln_eps", c.ln_eps);
  const std::string pooling = j.value("pooling", std::string(c.pooling == Pooling::Mean ? "mean" : "cls"));
  if (pooling == "mean") {
    c.pooling = Pooling::Mean;
  } else if (pooling == "cls") {
    c.pooling = Pooling::Cls;
  } else {
    throw ConfigError("unknown pooling mode: " + pooling);
  }
}

namespace {

Tensor normal_init(num::Shape shape, num::Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.normal(0.0, stddev);
  return t;
}

}  // namespace

TextEncoder::TextEncoder(ParameterSet& params, const EncoderConfig& config, std::size_t vocab_size, num::Rng& init,
                         const std::string& prefix)
    : config_(config), vocab_size_(vocab_size) {
  if (config.d_model == 0 || config.heads == 0 || config.d_model % config.heads != 0) {
    throw ConfigError(fmt::format("d_model {} must be a positive multiple of heads {}", config.d_model, config.heads));
  }
  if (vocab_size < kReservedIds || config.max_len < 2 || config.ff_dim == 0) {
    throw ConfigError("encoder needs vocab_size >= 3, max_len >= 2, ff_dim >= 1");
  }
  const std::size_t d = config.d_model;
  constexpr double kStd = 0.02;
  auto name = [&](const std::string& s) { return prefix + "." + s; };
  token_embedding_ = &params.add(name("token_embedding"), normal_init({vocab_size, d}, init, kStd));
  position_embedding_ = &params.add(name("position_embedding"), normal_init({config.max_len, d}, init, kStd));
  emb_ln_g_ = &params.add(name("embedding_ln.gain"), Tensor({d}, 1.0));
  emb_ln_b_ = &params.add(name("embedding_ln.shift"), Tensor({d}, 0.0));
  for (std::size_t l = 0; l < config.layers; ++l) {
    auto n = [&](const std::string& s) { return name(fmt::format("block{}.{}", l, s)); };
    Block b{};
    b.wq = &params.add(n("attn.wq"), normal_init({d, d}, init, kStd));
    b.bq = &params.add(n("attn.bq"), Tensor({d}, 0.0));
    b.wk = &params.add(n("attn.wk"), normal_init({d, d}, init, kStd));
    b.bk = &params.add(n("attn.bk"), Tensor({d}, 0.0));
    b.wv = &params.add(n("attn.wv"), normal_init({d, d}, init, kStd));
    b.bv = &params.add(n("attn.bv"), Tensor({d}, 0.0));
    b.wo = &params.add(n("attn.wo"), normal_init({d, d}, init, kStd));
    b.bo = &params.add(n("attn.bo"), Tensor({d}, 0.0));
    b.ln1_g = &params.add(n("ln1.gain"), Tensor({d}, 1.0));
    b.ln1_b = &params.add(n("ln1.shift"), Tensor({d}, 0.0));
    b.w1 = &params.add(n("ffn.w1"), normal_init({d, config.ff_dim}, init, kStd));
    b.b1 = &params.add(n("ffn.b1"), Tensor({config.ff_dim}, 0.0));
    b.w2 = &params.add(n("ffn.w2"), normal_init({config.ff_dim, d}, init, kStd));
    b.b2 = &params.add(n("ffn.b2"), Tensor({d}, 0.0));
    b.ln2_g = &params.add(n("ln2.gain"), Tensor({d}, 1.0));
    b.ln2_b = &params.add(n("ln2.shift"), Tensor({d}, 0.0));
    blocks_.push_back(b);
  }
}

TextEncoder::Hidden TextEncoder::forward_hidden(Tape& tape, std::span<const TokenSequence* const> batch) const {
  if (batch.empty()) throw ShapeError("encode: empty batch");
  const std::size_t max_len = config_.max_len;
  std::size_t seq = 1;
  for (const auto* s : batch) {
    if (s->ids.empty() || s->ids.size() != s->mask.size()) throw ShapeError("encode: malformed token sequence");
    if (s->ids.size() > max_len) {
      logger()->warn("sequence of length {} truncated to max_len {}", s->ids.size(), max_len);
    }
    seq = std::max(seq, std::min(s->ids.size(), max_len));
  }
  const std::size_t nb = batch.size();
  std::vector<std::size_t> ids(nb * seq, kPadId);
  std::vector<std::size_t> positions(nb * seq);
  std::vector<double> key_mask(nb * seq, 0.0);
  std::vector<double> pool_mask(nb * seq, 0.0);
  std::vector<std::size_t> cls_rows(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& s = *batch[b];
    const std::size_t len = std::min(s.ids.size(), max_len);
    bool has_content = false;
    for (std::size_t t = 0; t < seq; ++t) positions[b * seq + t] = t;
    for (std::size_t t = 0; t < len; ++t) {
      if (s.ids[t] >= vocab_size_) {
        throw ShapeError(fmt::format("encode: token id {} outside vocabulary of {}", s.ids[t], vocab_size_));
      }
      ids[b * seq + t] = s.ids[t];
      key_mask[b * seq + t] = s.mask[t];
      const bool content = s.mask[t] != 0.0 && s.ids[t] != kClsId;
      pool_mask[b * seq + t] = content ? 1.0 : 0.0;
      has_content = has_content || content;
    }
    if (!has_content) pool_mask[b * seq] = 1.0;
    cls_rows[b] = b * seq;
  }

  const double eps = config_.ln_eps;
  Var x = num::add(num::embedding(tape.leaf(*token_embedding_), ids),
                   num::embedding(tape.leaf(*position_embedding_), positions));
  x = num::layer_norm(x, tape.leaf(*emb_ln_g_), tape.leaf(*emb_ln_b_), eps);
  auto linear = [&](Var in, Parameter* w, Parameter* bias) {
    return num::add_bias(num::matmul(in, tape.leaf(*w)), tape.leaf(*bias));
  };
  for (const auto& blk : blocks_) {
    Var q = linear(x, blk.wq, blk.bq);
    Var k = linear(x, blk.wk, blk.bk);
    Var v = linear(x, blk.wv, blk.bv);
    Var attn = num::multi_head_attention(q, k, v, key_mask, nb, seq, config_.heads);
    x = num::layer_norm(num::add(x, linear(attn, blk.wo, blk.bo)), tape.leaf(*blk.ln1_g), tape.leaf(*blk.ln1_b), eps);
    Var ff = linear(num::gelu(linear(x, blk.w1, blk.b1)), blk.w2, blk.b2);
    x = num::layer_norm(num::add(x, ff), tape.leaf(*blk.ln2_g), tape.leaf(*blk.ln2_b), eps);
  }
  return Hidden{x, seq, std::move(pool_mask), std::move(cls_rows)};
}

Var TextEncoder::encode(Tape& tape, std::span<const TokenSequence* const> batch) const {
  Hidden h = forward_hidden(tape, batch);
  if (config_.pooling == Pooling::Cls) return num::select_rows(h.states, h.cls_rows);
  return num::masked_mean_pool(h.states, h.pool_mask, batch.size(), h.seq);
}

Tensor TextEncoder::hidden_states(const TokenSequence& seq) const {
  Tape tape;
  const TokenSequence* batch[] = {&seq};
  return forward_hidden(tape, batch).states.value();
}

std::vector<double> TextEncoder::embed(const TokenSequence& seq) const {
  Tape tape;
  const TokenSequence* batch[] = {&seq};
  Var out = encode(tape, batch);
  return out.value().storage();
}

}  // namespace metsfuse::corpus
