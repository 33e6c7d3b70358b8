#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <cstring>
#include <sstream>

#include "fcgnn/checkpoint.hpp"
#include "fcgnn/error.hpp"
#include "fcgnn/gradcheck.hpp"
#include "fcgnn/ops.hpp"
#include "fcgnn/param.hpp"
#include "fcgnn/rng.hpp"
#include "fcgnn/tensor.hpp"

using namespace fcgnn;

namespace {

Tensor2 random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

Tensor2 naive_matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

// sum(out .* weights): a scalar loss with dL/dout = weights.
double weighted_sum(const Tensor2& out, const Tensor2& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.values()[i] * weights.values()[i];
  return s;
}

}  // namespace

TEST(Tensor, GemmMatchesNaiveOnAwkwardShapes) {
  Rng rng(1);
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 4, 2}, {7, 13, 5}, {17, 300, 33}, {64, 129, 70}, {5, 600, 9}};
  for (const auto& s : shapes) {
    const Tensor2 a = random_tensor(rng, s[0], s[1]);
    const Tensor2 b = random_tensor(rng, s[1], s[2]);
    EXPECT_LT(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-11) << s[0] << "x" << s[1] << "x" << s[2];
    EXPECT_LT(max_abs_diff(matmul_nt(a, transpose(b)), naive_matmul(a, b)), 1e-11);
    EXPECT_LT(max_abs_diff(matmul_tn(transpose(a), b), naive_matmul(a, b)), 1e-11);
  }
}

TEST(Tensor, GemmRowDependsOnlyOnItsInputRow) {
  Rng rng(2);
  const Tensor2 a = random_tensor(rng, 37, 50);
  const Tensor2 b = random_tensor(rng, 50, 19);
  const Tensor2 full = matmul(a, b);
  for (std::size_t r : {0u, 5u, 36u}) {
    const std::vector<std::size_t> idx = {r};
    const Tensor2 single = matmul(gather_rows(a, idx), b);
    for (std::size_t j = 0; j < b.cols(); ++j) EXPECT_EQ(single(0, j), full(r, j));
  }
}

TEST(Tensor, ShapeErrorsNameShapes) {
  try {
    matmul(Tensor2(2, 3), Tensor2(4, 2));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(Tensor2(2, 2, std::vector<double>(3)), std::invalid_argument);
  EXPECT_THROW((Tensor2{{1.0, 2.0}, {3.0}}), std::invalid_argument);
}

TEST(Tensor, ConcatSplitGatherAndSums) {
  const Tensor2 a = {{1, 2}, {3, 4}};
  const Tensor2 b = {{5}, {6}};
  const std::vector<Tensor2> blocks = {a, b};
  const Tensor2 c = hconcat(blocks);
  EXPECT_EQ(c, (Tensor2{{1, 2, 5}, {3, 4, 6}}));
  const std::vector<std::size_t> widths = {2, 1};
  const auto parts = hsplit(c, widths);
  EXPECT_EQ(parts[0], a);
  EXPECT_EQ(parts[1], b);
  EXPECT_EQ(column_sums(a), (Tensor2{{4, 6}}));
  const std::vector<std::size_t> idx = {1, 1, 0};
  EXPECT_EQ(gather_rows(a, idx), (Tensor2{{3, 4}, {3, 4}, {1, 2}}));
  const std::vector<std::size_t> bad = {2};
  EXPECT_THROW(gather_rows(a, bad), std::out_of_range);
  std::vector<double> values = {1e16, 1.0, -1e16, 1.0};
  std::vector<double> reordered = {1.0, -1e16, 1.0, 1e16};
  EXPECT_EQ(order_independent_sum(values), order_independent_sum(reordered));
}

TEST(Tensor, LexicographicRowOrder) {
  const Tensor2 a = {{2, 0}, {1, 5}, {1, 3}};
  EXPECT_EQ(lexicographic_row_order(a), (std::vector<std::size_t>{2, 1, 0}));
}

TEST(Affine, Examples) {
  ParamStore store;
  const ParamId w = store.add("w", Tensor2{{1, 2}, {3, 4}});
  const ParamId b = store.add("b", Tensor2(1, 2, 0.0));
  EXPECT_EQ(affine_forward(Tensor2{{1, 0}, {0, 1}}, store[w], store[b]), (Tensor2{{1, 2}, {3, 4}}));
  store[w].value.fill(0.0);
  store[b].value = Tensor2{{7, -1}};
  Rng rng(3);
  const Tensor2 out = affine_forward(random_tensor(rng, 4, 2), store[w], store[b]);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(out(r, 0), 7.0);
    EXPECT_EQ(out(r, 1), -1.0);
  }
  EXPECT_THROW(affine_forward(Tensor2(2, 3), store[w], store[b]), std::invalid_argument);
}

TEST(Affine, GradientCheck) {
  Rng rng(4);
  ParamStore store;
  const ParamId w = store.add("w", random_tensor(rng, 4, 2));
  const ParamId b = store.add("b", random_tensor(rng, 1, 2));
  const ParamId xp = store.add("x", random_tensor(rng, 3, 4));
  const Tensor2 weights = random_tensor(rng, 3, 2);
  auto loss = [&](bool backward) {
    const Tensor2 out = affine_forward(store[xp].value, store[w], store[b]);
    if (backward) add_inplace(store[xp].grad, affine_backward(store[xp].value, weights, store[w], store[b]));
    return weighted_sum(out, weights);
  };
  EXPECT_LT(grad_check(loss, store).max_relative_error, 1e-6);
}

TEST(Relu, ExamplesAndGradient) {
  EXPECT_EQ(relu_forward(Tensor2{{-1, 2}}), (Tensor2{{0, 2}}));
  const Tensor2 neg = {{-1, -2}, {-0.5, -3}};
  EXPECT_EQ(relu_forward(neg), Tensor2(2, 2, 0.0));
  EXPECT_EQ(relu_backward(neg, Tensor2(2, 2, 1.0)), Tensor2(2, 2, 0.0));

  Rng rng(5);
  ParamStore store;
  Tensor2 x = random_tensor(rng, 5, 4);
  for (double& v : x.values()) v += v >= 0 ? 0.1 : -0.1;  // keep off the kink
  const ParamId xp = store.add("x", x);
  const Tensor2 weights = random_tensor(rng, 5, 4);
  auto loss = [&](bool backward) {
    const Tensor2 out = relu_forward(store[xp].value);
    if (backward) add_inplace(store[xp].grad, relu_backward(store[xp].value, weights));
    return weighted_sum(out, weights);
  };
  EXPECT_LT(grad_check(loss, store).max_relative_error, 1e-6);
}

TEST(Dropout, IdentityCasesAndMean) {
  Rng rng(6);
  const Tensor2 x = random_tensor(rng, 3, 3);
  DropoutMask mask;
  EXPECT_EQ(dropout_forward(x, 0.0, rng, true, mask), x);
  EXPECT_EQ(dropout_forward(x, 0.7, rng, false, mask), x);
  EXPECT_EQ(dropout_backward(mask, x), x);
  const Tensor2 ones(1000, 100, 1.0);
  const Tensor2 out = dropout_forward(ones, 0.5, rng, true, mask);
  const double mean = std::accumulate(out.values().begin(), out.values().end(), 0.0) / 1e5;
  EXPECT_NEAR(mean, 1.0, 0.02);
  for (double v : out.values()) EXPECT_TRUE(v == 0.0 || v == 2.0);
  EXPECT_EQ(dropout_backward(mask, ones), out);
  EXPECT_THROW(dropout_forward(x, 1.0, rng, true, mask), ConfigError);
  EXPECT_THROW(dropout_forward(x, -0.1, rng, true, mask), ConfigError);
}

TEST(BatchNorm, Examples) {
  ParamStore store;
  const ParamId g = store.add("g", Tensor2(1, 2, 1.0));
  const ParamId b = store.add("b", Tensor2(1, 2, 0.0));
  BatchNormState state(2);
  BatchNormCache cache;
  const Tensor2 out = batch_norm_forward(Tensor2{{1, 5}, {3, 5}}, store[g], store[b], true, state, cache);
  EXPECT_NEAR(out(0, 0), -0.9999950000374997, 1e-12);
  EXPECT_NEAR(out(1, 0), 0.9999950000374997, 1e-12);
  EXPECT_NEAR(out(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(state.running_mean(0, 0), 0.2, 1e-12);
  EXPECT_NEAR(state.running_var(0, 0), 0.9 + 0.1 * 1.0, 1e-12);
  EXPECT_THROW(batch_norm_forward(Tensor2{{1, 5}}, store[g], store[b], true, state, cache), ConfigError);
  // Eval with a single row is fine and uses the running statistics.
  const Tensor2 eval = batch_norm_forward(Tensor2{{0.2, 0.5}}, store[g], store[b], false, state, cache);
  EXPECT_NEAR(eval(0, 0), 0.0, 1e-12);
}

TEST(BatchNorm, GradientCheck) {
  Rng rng(7);
  ParamStore store;
  const ParamId g = store.add("g", random_tensor(rng, 1, 3));
  const ParamId b = store.add("b", random_tensor(rng, 1, 3));
  const ParamId xp = store.add("x", random_tensor(rng, 6, 3));
  const Tensor2 weights = random_tensor(rng, 6, 3);
  auto loss = [&](bool backward) {
    BatchNormState state(3);
    BatchNormCache cache;
    const Tensor2 out = batch_norm_forward(store[xp].value, store[g], store[b], true, state, cache);
    if (backward) add_inplace(store[xp].grad, batch_norm_backward(cache, weights, store[g], store[b]));
    return weighted_sum(out, weights);
  };
  EXPECT_LT(grad_check(loss, store).max_relative_error, 1e-5);
}

TEST(SoftmaxCrossEntropy, Examples) {
  const std::vector<std::size_t> t0 = {0};
  EXPECT_NEAR(softmax_cross_entropy(Tensor2(1, 5, 0.3), t0).loss, std::log(5.0), 1e-12);
  EXPECT_LT(softmax_cross_entropy(Tensor2{{1000, 0, 0}}, t0).loss, 1e-6);
  const std::vector<std::size_t> t9 = {9};
  EXPECT_THROW(softmax_cross_entropy(Tensor2(1, 5), t9), std::out_of_range);
  Rng rng(8);
  const Tensor2 p = softmax(random_tensor(rng, 10, 6, 50.0));
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0;
    for (double v : p.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SoftmaxCrossEntropy, GradientCheck) {
  Rng rng(9);
  ParamStore store;
  const ParamId lp = store.add("logits", random_tensor(rng, 4, 5, 2.0));
  const std::vector<std::size_t> targets = {0, 3, 4, 3};
  auto loss = [&](bool backward) {
    const auto r = softmax_cross_entropy(store[lp].value, targets);
    if (backward) add_inplace(store[lp].grad, r.dlogits);
    return r.loss;
  };
  EXPECT_LT(grad_check(loss, store).max_relative_error, 1e-6);
}

TEST(Adam, FirstStepAndDecay) {
  ParamStore store;
  const ParamId p = store.add("p", Tensor2{{0.5}});
  store[p].grad(0, 0) = 2.0;
  AdamOptions opts;
  adam_step(store, opts);
  EXPECT_NEAR(store[p].value(0, 0) - 0.5, -0.000999999995, 1e-15);
  EXPECT_EQ(store[p].grad(0, 0), 0.0);
  EXPECT_EQ(store[p].step_count, 1);

  ParamStore zero;
  const ParamId q = zero.add("q", Tensor2{{1.5, -2.0}});
  adam_step(zero, opts);
  EXPECT_EQ(zero[q].value, (Tensor2{{1.5, -2.0}}));
  opts.weight_decay = 0.001;
  adam_step(zero, opts);
  EXPECT_DOUBLE_EQ(zero[q].value(0, 0), 1.5 * 0.999999);
  EXPECT_DOUBLE_EQ(zero[q].value(0, 1), -2.0 * 0.999999);
}

TEST(Adam, ZeroLearningRateIsNoOp) {
  Rng rng(10);
  ParamStore store;
  const ParamId p = store.add("p", random_tensor(rng, 3, 3));
  const Tensor2 before = store[p].value;
  store[p].grad = random_tensor(rng, 3, 3);
  AdamOptions opts;
  opts.learning_rate = 0.0;
  adam_step(store, opts);
  EXPECT_EQ(store[p].value, before);
}

TEST(Adam, NonFiniteGradientNamesParameterAndLeavesValues) {
  ParamStore store;
  const ParamId a = store.add("layer0.weight", Tensor2{{1.0}});
  const ParamId b = store.add("layer1.weight", Tensor2{{2.0}});
  store[a].grad(0, 0) = 1.0;
  store[b].grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(store, {});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("layer1.weight"), std::string::npos);
  }
  EXPECT_EQ(store[a].value(0, 0), 1.0);
  EXPECT_EQ(store[a].step_count, 0);
}

TEST(Glorot, BoundsDeterminismAndMean) {
  Rng r1(11);
  Rng r2(11);
  const Tensor2 a = glorot_init(4, 4, r1);
  EXPECT_EQ(a, glorot_init(4, 4, r2));
  for (double v : a.values()) EXPECT_LE(std::abs(v), 0.8660254037844386);
  const Tensor2 big = glorot_init(100, 100, r1);
  EXPECT_NEAR(std::accumulate(big.values().begin(), big.values().end(), 0.0) / 1e4, 0.0, 0.02);
  EXPECT_THROW(glorot_init(0, 3, r1), ConfigError);
}

TEST(GradCheck, ToyModelEmptyStoreAndMutation) {
  Rng rng(12);
  ParamStore store;
  const ParamId w1 = store.add("w1", random_tensor(rng, 4, 6));
  const ParamId b1 = store.add("b1", random_tensor(rng, 1, 6));
  const ParamId w2 = store.add("w2", random_tensor(rng, 6, 3));
  const ParamId b2 = store.add("b2", random_tensor(rng, 1, 3));
  const Tensor2 x = random_tensor(rng, 5, 4);
  const std::vector<std::size_t> targets = {0, 1, 2, 1, 0};
  bool corrupt = false;
  auto loss = [&](bool backward) {
    const Tensor2 h = affine_forward(x, store[w1], store[b1]);
    const Tensor2 a = relu_forward(h);
    const Tensor2 logits = affine_forward(a, store[w2], store[b2]);
    auto r = softmax_cross_entropy(logits, targets);
    if (backward) {
      if (corrupt) scale_inplace(r.dlogits, 1.5);
      const Tensor2 da = affine_backward(a, r.dlogits, store[w2], store[b2]);
      affine_backward(x, relu_backward(h, da), store[w1], store[b1]);
    }
    return r.loss;
  };
  EXPECT_LT(grad_check(loss, store).max_relative_error, 1e-5);
  corrupt = true;
  EXPECT_GT(grad_check(loss, store).max_relative_error, 1e-2);

  ParamStore empty;
  const auto r = grad_check([](bool) { return 1.0; }, empty);
  EXPECT_EQ(r.max_relative_error, 0.0);
  EXPECT_EQ(r.entries_checked, 0u);
}

TEST(ParamStore, SnapshotRestoreAndCounts) {
  ParamStore store;
  store.add("a", Tensor2(2, 3, 1.0));
  store.add("b", Tensor2(1, 3, 2.0));
  EXPECT_EQ(store.scalar_count(), 9u);
  const auto snap = store.snapshot();
  store[0].value.fill(5.0);
  store.restore(snap);
  EXPECT_EQ(store[0].value, Tensor2(2, 3, 1.0));
  EXPECT_THROW(store.restore({}), std::invalid_argument);
}

TEST(RngStreams, SeedsAndDerivedSeeds) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(derive_seed(1, "split"), derive_seed(1, "init"));
  EXPECT_NE(derive_seed(1, "split"), derive_seed(2, "split"));
  EXPECT_EQ(derive_seed(1, "split"), derive_seed(1, "split"));
  Rng c(3);
  for (int i = 0; i < 1000; ++i) {
    const auto v = c.below(7);
    EXPECT_LT(v, 7u);
    const double u = c.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(CheckpointFile, BitExactRoundTrip) {
  Checkpoint ckpt;
  ckpt.descriptor = {{"format", "test"}, {"n", 3}};
  ckpt.tensors.emplace_back("w", Tensor2{{0.1, -0.0, 1e-308}, {std::nextafter(1.0, 2.0), -3.5, 0.3}});
  ckpt.tensors.emplace_back("empty", Tensor2(0, 4));
  std::stringstream buffer;
  write_checkpoint(buffer, ckpt);
  const Checkpoint back = read_checkpoint(buffer);
  EXPECT_EQ(back.descriptor, ckpt.descriptor);
  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(back.tensors[0].first, "w");
  const auto& w = back.tensor("w");
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(std::memcmp(&w.values()[i], &ckpt.tensors[0].second.values()[i], sizeof(double)), 0);
  }
  EXPECT_EQ(back.tensor("empty").cols(), 4u);
  EXPECT_THROW(back.tensor("missing"), DataError);
}

TEST(CheckpointFile, CorruptionIsDetected) {
  Checkpoint ckpt;
  ckpt.tensors.emplace_back("w", Tensor2{{1.0, 2.0}});
  std::stringstream buffer;
  write_checkpoint(buffer, ckpt);
  const std::string bytes = buffer.str();

  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  std::istringstream a(flipped);
  EXPECT_THROW(read_checkpoint(a), DataError);

  std::istringstream b(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_checkpoint(b), DataError);

  std::string magic = bytes;
  magic[0] = 'X';
  std::istringstream c(magic);
  EXPECT_THROW(read_checkpoint(c), DataError);

  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.fcgnn"), DataError);
}
