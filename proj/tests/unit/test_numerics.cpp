#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "metsfuse/error.hpp"
#include "metsfuse/numerics/adamw.hpp"
#include "metsfuse/numerics/checkpoint.hpp"
#include "metsfuse/numerics/grad_check.hpp"
#include "metsfuse/numerics/ops.hpp"

using namespace metsfuse;
using namespace metsfuse::num;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.normal() * scale;
  return t;
}

// Values bounded away from zero so relu/clamp kinks stay outside the FD stencil.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) {
    const double mag = 0.1 + rng.uniform();
    v = rng.bernoulli(0.5) ? mag : -mag;
  }
  return t;
}

// Random weighting so every output element contributes a distinct gradient.
Var weighted_sum(Tape& tape, Var y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, tape.constant(random_tensor(y.shape(), rng))));
}

}  // namespace

TEST(Tensor, ShapeInvariant) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6U);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1.0, 2.0, 3.0}), ShapeError);
  EXPECT_THROW(Tensor({0, 2}), ShapeError);
}

TEST(Ops, SoftmaxOfZerosIsUniform) {
  Tape tape;
  auto y = softmax(tape.constant(Tensor({3}, {0.0, 0.0, 0.0})));
  for (double v : y.value().storage()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    auto y = softmax(tape.constant(random_tensor({4, 9}, rng, 10.0)));
    for (std::size_t i = 0; i < 4; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 9; ++j) total += y.value().at(i, j);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Ops, IdentityMatmul) {
  Rng rng(3);
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  Tape tape;
  Tensor a = random_tensor({3, 5}, rng);
  auto y = matmul(tape.constant(eye), tape.constant(a));
  EXPECT_EQ(y.value(), a);
}

TEST(Ops, LayerNormHandValue) {
  // (x - 2) / sqrt(2/3 + 1e-5)
  Tape tape;
  auto y = layer_norm(tape.constant(Tensor({1, 3}, {1.0, 2.0, 3.0})), tape.constant(Tensor({3}, 1.0)),
                      tape.constant(Tensor({3}, 0.0)), 1e-5);
  EXPECT_NEAR(y.value()[0], -1.2247357, 1e-6);
  EXPECT_NEAR(y.value()[1], 0.0, 1e-12);
  EXPECT_NEAR(y.value()[2], 1.2247357, 1e-6);
}

TEST(Ops, ShapeMismatchNamesOpAndShapes) {
  Tape tape;
  try {
    matmul(tape.constant(Tensor({2, 3})), tape.constant(Tensor({4, 2})));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
    EXPECT_NE(msg.find("[4, 2]"), std::string::npos);
  }
}

TEST(Ops, NonFiniteInputRejected) {
  Tape tape;
  Tensor bad({1, 2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  EXPECT_THROW(relu(tape.constant(bad)), NumericError);
  EXPECT_THROW(softmax(tape.constant(bad)), NumericError);
}

TEST(Ops, DropoutEvalIsIdentity) {
  Rng rng(1);
  Tape tape;
  auto x = tape.constant(random_tensor({4, 4}, rng));
  auto y = dropout(x, 0.3, Mode::Eval, rng);
  EXPECT_EQ(y.value(), x.value());
}

TEST(Ops, DropoutTrainScalesKeptUnits) {
  Rng rng(1);
  Tape tape;
  auto x = tape.constant(Tensor({100, 10}, 1.0));
  auto y = dropout(x, 0.3, Mode::Train, rng);
  std::size_t kept = 0;
  for (double v : y.value().storage()) {
    if (v != 0.0) {
      EXPECT_DOUBLE_EQ(v, 1.0 / 0.7);
      ++kept;
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1000.0, 0.7, 0.05);
}

TEST(Backward, SumOfSquares) {
  ParameterSet ps;
  auto& w = ps.add("w", Tensor({2}, {1.0, 2.0}));
  Tape tape;
  auto lw = tape.leaf(w);
  tape.backward(sum(mul(lw, lw)));
  EXPECT_DOUBLE_EQ(w.grad[0], 2.0);
  EXPECT_DOUBLE_EQ(w.grad[1], 4.0);
}

TEST(Backward, ConstantLossGivesZeroGradients) {
  ParameterSet ps;
  auto& w = ps.add("w", Tensor({2}, {1.0, 2.0}));
  Tape tape;
  tape.leaf(w);
  tape.backward(sum(tape.constant(Tensor({3}, 1.0))));
  EXPECT_EQ(w.grad, Tensor({2}, 0.0));
}

TEST(Backward, NonScalarLossRejected) {
  ParameterSet ps;
  auto& w = ps.add("w", Tensor({2}, {1.0, 2.0}));
  Tape tape;
  auto y = scale(tape.leaf(w), 2.0);
  EXPECT_THROW(tape.backward(y), ShapeError);
}

TEST(Backward, SharedParameterAccumulatesBothPaths) {
  Rng rng(11);
  Tensor a = random_tensor({3, 3}, rng);
  Tensor init = random_tensor({3, 3}, rng);
  auto loss_of = [&](Tape& tape, Var first, Var second) {
    return sum(mul(matmul(first, tape.constant(a)), second));
  };
  ParameterSet shared;
  auto& w = shared.add("w", init);
  {
    Tape tape;
    tape.backward(loss_of(tape, tape.leaf(w), tape.leaf(w)));
  }
  ParameterSet dup;
  auto& w1 = dup.add("w1", init);
  auto& w2 = dup.add("w2", init);
  {
    Tape tape;
    tape.backward(loss_of(tape, tape.leaf(w1), tape.leaf(w2)));
  }
  for (std::size_t i = 0; i < w.grad.size(); ++i) EXPECT_NEAR(w.grad[i], w1.grad[i] + w2.grad[i], 1e-12);
}

TEST(Backward, UnreachableParameterGetsZero) {
  ParameterSet ps;
  auto& used = ps.add("used", Tensor({2}, 1.0));
  auto& unused = ps.add("unused", Tensor({2}, 1.0));
  Tape tape;
  tape.leaf(unused);
  tape.backward(sum(tape.leaf(used)));
  EXPECT_EQ(unused.grad, Tensor({2}, 0.0));
  EXPECT_EQ(used.grad, Tensor({2}, 1.0));
}

// Each primitive against central differences, h = 1e-5, relative error < 1e-4.
class PrimitiveGradients : public ::testing::Test {
 protected:
  void check(ParameterSet& ps, const LossBuilder& build) {
    auto report = grad_check(ps, build);
    for (const auto& p : report.params) {
      EXPECT_LT(p.max_relative_error, 1e-4) << p.name;
    }
  }
  Rng rng{2024};
};

TEST_F(PrimitiveGradients, Matmul) {
  ParameterSet ps;
  auto& a = ps.add("a", random_tensor({3, 4}, rng));
  auto& b = ps.add("b", random_tensor({4, 2}, rng));
  check(ps, [&](Tape& t) { return weighted_sum(t, matmul(t.leaf(a), t.leaf(b)), 1); });
}

TEST_F(PrimitiveGradients, ElementwiseAndBias) {
  ParameterSet ps;
  auto& a = ps.add("a", random_tensor({3, 4}, rng));
  auto& b = ps.add("b", random_tensor({3, 4}, rng));
  auto& bias = ps.add("bias", random_tensor({4}, rng));
  check(ps, [&](Tape& t) {
    auto x = add(t.leaf(a), t.leaf(b));
    auto y = mul(sub(x, t.leaf(b)), t.leaf(a));
    return weighted_sum(t, add_bias(add_scalar(scale(y, 1.5), 0.2), t.leaf(bias)), 2);
  });
}

TEST_F(PrimitiveGradients, Activations) {
  ParameterSet ps;
  auto& a = ps.add("a", away_from_zero({3, 5}, rng));
  check(ps, [&](Tape& t) {
    auto x = t.leaf(a);
    auto y = add(add(relu(x), gelu(x)), clamp(x, -0.05, 0.05));
    return weighted_sum(t, y, 3);
  });
}

TEST_F(PrimitiveGradients, LogAndSoftmax) {
  ParameterSet ps;
  auto& a = ps.add("a", random_tensor({3, 4}, rng));
  check(ps, [&](Tape& t) { return weighted_sum(t, log(softmax(t.leaf(a))), 4); });
}

TEST_F(PrimitiveGradients, LayerNorm) {
  ParameterSet ps;
  auto& x = ps.add("x", random_tensor({4, 6}, rng));
  auto& g = ps.add("gamma", random_tensor({6}, rng));
  auto& b = ps.add("beta", random_tensor({6}, rng));
  check(ps, [&](Tape& t) { return weighted_sum(t, layer_norm(t.leaf(x), t.leaf(g), t.leaf(b)), 5); });
}

TEST_F(PrimitiveGradients, PoolingSelectionAndConcat) {
  ParameterSet ps;
  auto& x = ps.add("x", random_tensor({6, 4}, rng));
  auto& y = ps.add("y", random_tensor({2, 3}, rng));
  const std::vector<double> mask{1, 1, 0, 1, 0, 0};
  const std::vector<std::size_t> rows{0, 3};
  check(ps, [&](Tape& t) {
    auto pooled = masked_mean_pool(t.leaf(x), mask, 2, 3);
    auto picked = select_rows(t.leaf(x), rows);
    std::vector<Var> parts{pooled, slice_cols(picked, 1, 2), t.leaf(y)};
    return weighted_sum(t, concat(parts), 6);
  });
}

TEST_F(PrimitiveGradients, EmbeddingWithRepeatedIds) {
  ParameterSet ps;
  auto& table = ps.add("table", random_tensor({5, 3}, rng));
  const std::vector<std::size_t> ids{1, 4, 1, 0};
  check(ps, [&](Tape& t) { return weighted_sum(t, embedding(t.leaf(table), ids), 7); });
}

TEST_F(PrimitiveGradients, DropoutWithFixedMask) {
  ParameterSet ps;
  auto& x = ps.add("x", random_tensor({4, 4}, rng));
  check(ps, [&](Tape& t) {
    Rng mask_rng(99);
    return weighted_sum(t, dropout(t.leaf(x), 0.4, Mode::Train, mask_rng), 8);
  });
}

TEST_F(PrimitiveGradients, ReductionsAndReshape) {
  ParameterSet ps;
  auto& x = ps.add("x", random_tensor({2, 3}, rng));
  check(ps, [&](Tape& t) {
    auto r = reshape(t.leaf(x), {3, 2});
    return add(mean(mul(r, r)), scale(sum(r), 0.3));
  });
}

TEST_F(PrimitiveGradients, MultiHeadAttentionWithPadding) {
  ParameterSet ps;
  auto& q = ps.add("q", random_tensor({8, 4}, rng));
  auto& k = ps.add("k", random_tensor({8, 4}, rng));
  auto& v = ps.add("v", random_tensor({8, 4}, rng));
  const std::vector<double> mask{1, 1, 1, 0, 1, 1, 0, 0};
  check(ps, [&](Tape& t) {
    return weighted_sum(t, multi_head_attention(t.leaf(q), t.leaf(k), t.leaf(v), mask, 2, 4, 2), 9);
  });
}

TEST(Attention, PaddedKeysDoNotChangeRealRows) {
  Rng rng(5);
  Tensor q = random_tensor({3, 4}, rng);
  Tensor k = random_tensor({3, 4}, rng);
  Tensor v = random_tensor({3, 4}, rng);
  Tape tape;
  const std::vector<double> mask3{1, 1, 1};
  auto base = multi_head_attention(tape.constant(q), tape.constant(k), tape.constant(v), mask3, 1, 3, 2);
  auto pad = [&](const Tensor& t) {
    Tensor out({5, 4}, 7.0);
    std::copy(t.storage().begin(), t.storage().end(), out.storage().begin());
    return out;
  };
  const std::vector<double> mask5{1, 1, 1, 0, 0};
  auto padded = multi_head_attention(tape.constant(pad(q)), tape.constant(pad(k)), tape.constant(pad(v)), mask5, 1, 5, 2);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(base.value()[i], padded.value()[i]);
}

TEST(GradCheck, LinearLayerAnySeed) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    ParameterSet ps;
    auto& w = ps.add("w", random_tensor({4, 3}, rng));
    auto& b = ps.add("b", random_tensor({3}, rng));
    Tensor x = random_tensor({5, 4}, rng);
    auto report = grad_check(ps, [&](Tape& t) {
      return weighted_sum(t, add_bias(matmul(t.constant(x), t.leaf(w)), t.leaf(b)), seed);
    });
    EXPECT_LT(report.max_relative_error, 1e-4);
  }
}

TEST(GradCheck, FrozenParameterExcluded) {
  Rng rng(0);
  ParameterSet ps;
  auto& w = ps.add("w", random_tensor({2, 2}, rng));
  auto& frozen = ps.add("frozen", random_tensor({2, 2}, rng), false);
  auto report = grad_check(ps, [&](Tape& t) { return sum(mul(t.leaf(w), t.leaf(frozen))); });
  ASSERT_EQ(report.params.size(), 1U);
  EXPECT_EQ(report.params[0].name, "w");
}

TEST(Determinism, SameSeedBitIdentical) {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    ParameterSet ps;
    auto& w = ps.add("w", random_tensor({4, 4}, rng));
    Tape tape;
    Rng drop(seed + 1);
    auto y = dropout(gelu(matmul(tape.leaf(w), tape.leaf(w))), 0.3, Mode::Train, drop);
    auto loss = sum(softmax(y));
    tape.backward(mean(mul(y, y)));
    return std::make_pair(y.value(), w.grad);
  };
  auto a = run(17);
  auto b = run(17);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Rng, DerivedStreamsDifferAndRepeat) {
  auto a = Rng::derive(1, {2, 3});
  auto b = Rng::derive(1, {2, 3});
  auto c = Rng::derive(1, {3, 2});
  const auto x = a.next_u64();
  EXPECT_EQ(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
}

TEST(Rng, BelowIsInRangeAndRoughlyUniform) {
  Rng rng(42);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(AdamW, ZeroGradientZeroDecayLeavesParameter) {
  ParameterSet ps;
  auto& w = ps.add("w", Tensor({3}, {1.0, -2.0, 3.0}));
  AdamW opt(ps, {.learning_rate = 0.1, .weight_decay = 0.0});
  opt.step(ps);
  EXPECT_EQ(w.value, Tensor({3}, {1.0, -2.0, 3.0}));
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  // t=1: m_hat = g = 1, v_hat = g^2 = 1, update = -lr * 1 / (1 + 1e-8)
  ParameterSet ps;
  auto& w = ps.add("w", Tensor({1}, {0.5}));
  w.grad[0] = 1.0;
  AdamW opt(ps, {.learning_rate = 0.1, .beta1 = 0.9, .beta2 = 0.999, .weight_decay = 0.0});
  opt.step(ps);
  EXPECT_NEAR(w.value[0] - 0.5, -0.1, 1e-8);
  EXPECT_EQ(opt.steps(), 1U);
}

TEST(AdamW, QuadraticMagnitudeDecreases) {
  ParameterSet ps;
  auto& w = ps.add("w", Tensor({1}, {1.0}));
  AdamW opt(ps, {.learning_rate = 0.01});
  double prev = std::abs(w.value[0]);
  for (int step = 0; step < 100; ++step) {
    ps.zero_grad();
    Tape tape;
    auto lw = tape.leaf(w);
    tape.backward(sum(mul(lw, lw)));
    opt.step(ps);
    const double now = std::abs(w.value[0]);
    ASSERT_LT(now, prev) << "step " << step;
    prev = now;
  }
  EXPECT_EQ(opt.steps(), 100U);
}

TEST(AdamW, NonFiniteGradientNamesParameter) {
  ParameterSet ps;
  ps.add("good", Tensor({1}, 1.0));
  auto& bad = ps.add("encoder.bad", Tensor({1}, 1.0));
  bad.grad[0] = std::numeric_limits<double>::infinity();
  AdamW opt(ps);
  try {
    opt.step(ps);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.bad"), std::string::npos);
  }
  EXPECT_EQ(ps.get("good").value[0], 1.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(8);
  ParameterSet ps;
  ps.add("a", random_tensor({3, 4}, rng));
  ps.add("b", Tensor({4}, {-0.0, std::numeric_limits<double>::denorm_min(), 1e308, -1.0 / 3.0}));
  CheckpointHeader header{"TS_HCL", {{"alpha", 0.7}}, 12345, {{"note", "x"}}};
  const std::string bytes = serialize_checkpoint(header, ps);
  auto ckpt = deserialize_checkpoint(bytes);
  EXPECT_EQ(ckpt.header.architecture, "TS_HCL");
  EXPECT_EQ(ckpt.header.seed, 12345U);
  ParameterSet loaded;
  loaded.add("a", Tensor({3, 4}));
  loaded.add("b", Tensor({4}));
  load_parameters(ckpt, loaded);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t k = 0; k < ps[i].value.size(); ++k) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(ps[i].value[k]), std::bit_cast<std::uint64_t>(loaded[i].value[k]));
    }
  }
  EXPECT_EQ(serialize_checkpoint(header, loaded), bytes);
}

TEST(Checkpoint, CorruptInputRejected) {
  EXPECT_THROW(deserialize_checkpoint("not a checkpoint"), DataError);
  ParameterSet ps;
  ps.add("a", Tensor({2}, 1.0));
  std::string bytes = serialize_checkpoint({}, ps);
  bytes.pop_back();
  EXPECT_THROW(deserialize_checkpoint(bytes), DataError);
}
