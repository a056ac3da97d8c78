#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "metsfuse/numerics/rng.hpp"
#include "metsfuse/numerics/tape.hpp"

// Differentiable primitives. Every op checks shapes (ShapeError naming the op and
// shapes) and rejects non-finite inputs (NumericError). Broadcasting exists only in
// add_bias and the scalar ops; anything else needs an explicit reshape.
namespace metsfuse::num {

enum class Mode { Train, Eval };

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var add_scalar(Var x, double value);
/// x[m,n] + bias[n] broadcast over rows.
Var add_bias(Var x, Var bias);
Var reshape(Var x, Shape shape);

Var relu(Var x);
/// Exact GELU, x * Phi(x).
Var gelu(Var x);
Var log(Var x);
Var clamp(Var x, double lo, double hi);

/// Softmax over the last axis.
Var softmax(Var x);
/// Per-row normalization over the last axis with gain and shift of length cols.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

/// x is [batch*seq, d] in sequence-major order; returns [batch, d] averaging rows with mask 1.
Var masked_mean_pool(Var x, std::span<const double> mask, std::size_t batch, std::size_t seq);
Var select_rows(Var x, std::span<const std::size_t> rows);
/// Concatenate rank-2 tensors with equal row counts along columns.
Var concat(std::span<const Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
/// Rows of table[vocab, d] gathered by id; gradient scatters back with accumulation.
Var embedding(Var table, std::span<const std::size_t> ids);
/// Inverted dropout: scales kept units by 1/(1-p) in training, identity in eval.
Var dropout(Var x, double p, Mode mode, Rng& rng);

Var sum(Var x);
Var mean(Var x);

/// Scaled dot-product self-attention split over `heads`, per sequence, with padded keys
/// excluded. q, k, v are [batch*seq, d]; key_mask has batch*seq entries (1 real, 0 pad).
Var multi_head_attention(Var q, Var k, Var v, std::span<const double> key_mask, std::size_t batch,
                         std::size_t seq, std::size_t heads);

}  // namespace metsfuse::num
