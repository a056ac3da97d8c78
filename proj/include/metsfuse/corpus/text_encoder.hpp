#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metsfuse/corpus/vocabulary.hpp"
#include "metsfuse/numerics/ops.hpp"

namespace metsfuse::corpus {

enum class Pooling { Mean, Cls };

struct EncoderConfig {
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t ff_dim = 64;
  std::size_t max_len = 64;
  Pooling pooling = Pooling::Mean;
  double ln_eps = 1e-5;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

/// BERT-style encoder: token + learned position embeddings, embedding layer norm, then
/// post-LN blocks of multi-head self-attention and a GELU feed-forward layer.
///
/// The pooled output is the mean of the final hidden states over content tokens (CLS
/// and PAD excluded; CLS alone when the text has no tokens), or the CLS state under
/// Pooling::Cls. Padded keys are removed from attention, so padding never changes the
/// pooled vector.
class TextEncoder {
 public:
  /// Registers parameters under `prefix` in `params`; initialization is normal(0, 0.02)
  /// for embeddings and weights, zeros for biases, ones for layer-norm gains.
  TextEncoder(num::ParameterSet& params, const EncoderConfig& config, std::size_t vocab_size, num::Rng& init,
              const std::string& prefix = "encoder");

  /// [batch, d_model] sequence embeddings. Sequences longer than max_len are truncated
  /// with a warning.
  num::Var encode(num::Tape& tape, std::span<const TokenSequence* const> batch) const;

  /// Eval-mode embedding of one sequence.
  std::vector<double> embed(const TokenSequence& seq) const;
  /// Final-layer hidden states of one sequence, [length, d_model].
  num::Tensor hidden_states(const TokenSequence& seq) const;

  const EncoderConfig& config() const noexcept { return config_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

 private:
  struct Block {
    num::Parameter *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    num::Parameter *ln1_g, *ln1_b;
    num::Parameter *w1, *b1, *w2, *b2;
    num::Parameter *ln2_g, *ln2_b;
  };

  struct Hidden {
    num::Var states;  // [batch * seq, d_model]
    std::size_t seq = 0;
    std::vector<double> pool_mask;
    std::vector<std::size_t> cls_rows;
  };
  Hidden forward_hidden(num::Tape& tape, std::span<const TokenSequence* const> batch) const;

  EncoderConfig config_;
  std::size_t vocab_size_;
  num::Parameter* token_embedding_;
  num::Parameter* position_embedding_;
  num::Parameter* emb_ln_g_;
  num::Parameter* emb_ln_b_;
  std::vector<Block> blocks_;
};

}  // namespace metsfuse::corpus
