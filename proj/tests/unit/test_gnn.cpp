#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "fcgnn/error.hpp"
#include "fcgnn/features.hpp"
#include "fcgnn/gnn.hpp"
#include "fcgnn/gradcheck.hpp"
#include "test_support.hpp"

using namespace fcgnn;
using fcgnn::testing::cycle_graph;
using fcgnn::testing::path_graph;

namespace {

Tensor2 random_tensor(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

Tensor2 permute_rows(const Tensor2& h, const std::vector<NodeId>& perm) {
  Tensor2 out(h.rows(), h.cols());
  for (std::size_t v = 0; v < h.rows(); ++v) {
    for (std::size_t c = 0; c < h.cols(); ++c) out(perm[v], c) = h(v, c);
  }
  return out;
}

BatchedGraph single(const Graph& g) {
  const Graph* ptr = &g;
  return batch_graphs(std::span<const Graph* const>(&ptr, 1));
}

ModelConfig small_config(Architecture arch, std::size_t layers = 2, std::size_t hidden = 8) {
  ModelConfig c;
  c.architecture = arch;
  c.num_layers = layers;
  c.hidden_dim = hidden;
  c.dropout_rate = 0.0;
  c.seed = 3;
  return c;
}

Tensor2 ldp_input(const Graph& g) { return ldp_node_features(g, LdpStats{}); }

// Freshly built models have zero biases, which puts whole rows exactly on a
// ReLU kink; finite differences are meaningless there.
void jitter_biases(GnnModel& model, Rng& rng) {
  for (auto& p : model.params().all()) {
    if (p.name.find("bias") == std::string::npos) continue;
    for (double& v : p.value.values()) v += rng.uniform(-0.3, 0.3);
  }
}

}  // namespace

TEST(Batching, TwoPathsAndTriangles) {
  const std::vector<Graph> graphs = {path_graph(3), path_graph(3)};
  const std::vector<Tensor2> feats = {Tensor2(3, 2, 1.0), Tensor2(3, 2, 2.0)};
  const auto [b, x] = batch(graphs, feats);
  EXPECT_EQ(b.merged.num_nodes(), 6u);
  EXPECT_EQ(b.merged.num_edges(), 4u);
  EXPECT_EQ(b.graph_id, (std::vector<std::size_t>{0, 0, 0, 1, 1, 1}));
  EXPECT_EQ(b.num_graphs, 2u);
  EXPECT_EQ(x(4, 0), 2.0);

  const std::vector<Graph> one = {cycle_graph(3)};
  const std::vector<Tensor2> one_feat = {Tensor2(3, 1, 0.5)};
  const auto [s, sx] = batch(one, one_feat);
  EXPECT_EQ(s.merged, cycle_graph(3));
  EXPECT_EQ(sx, one_feat[0]);

  const std::vector<Graph> tris(32, cycle_graph(3));
  const std::vector<Tensor2> tri_feats(32, Tensor2(3, 1));
  const auto [t, tx] = batch(tris, tri_feats);
  EXPECT_EQ(t.merged.num_nodes(), 96u);
  EXPECT_EQ(t.merged.num_edges(), 96u);
  for (NodeId v = 0; v < 96; ++v) {
    for (NodeId u : t.merged.neighbors(v)) EXPECT_EQ(t.graph_id[u], t.graph_id[v]);
  }
  const std::vector<Tensor2> short_feats(31, Tensor2(3, 1));
  EXPECT_THROW(batch(tris, short_feats), std::invalid_argument);
}

TEST(Adjacency, NormalizedExamples) {
  EXPECT_EQ(normalized_adjacency(Graph::from_edge_list({}, 1)).at(0, 0), 1.0);
  const auto two = normalized_adjacency(path_graph(2));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(two.at(i, j), 0.5);
  }
  EXPECT_NEAR(normalized_adjacency(path_graph(3)).at(0, 1), 0.4082482904638631, 1e-15);
  EXPECT_EQ(normalized_adjacency(path_graph(3)).at(0, 2), 0.0);
}

TEST(Adjacency, ApplyAndTransposeAgreeWithDense) {
  Rng rng(1);
  const Graph g = fcgnn::testing::random_graph(rng, 10, 20, 0.3);
  const auto s = mean_adjacency(g);  // not symmetric
  const Tensor2 h = random_tensor(rng, g.num_nodes(), 3);
  const Tensor2 a = s.apply(h);
  const Tensor2 at = s.apply_transpose(h);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      double ref = 0.0;
      double ref_t = 0.0;
      for (std::size_t j = 0; j < g.num_nodes(); ++j) {
        ref += s.at(i, j) * h(j, c);
        ref_t += s.at(j, i) * h(j, c);
      }
      EXPECT_NEAR(a(i, c), ref, 1e-12);
      EXPECT_NEAR(at(i, c), ref_t, 1e-12);
    }
  }
}

TEST(GcnLayerOp, Examples) {
  Rng rng(2);
  ParamStore store;
  GcnLayer layer = GcnLayer::create(store, "gcn", 1, 1, true, rng);
  store[layer.weight].value = Tensor2{{1.0}};
  store[layer.bias].value = Tensor2{{0.0}};
  GcnLayer::Cache cache;
  layer.forward(store, normalized_adjacency(path_graph(2)), Tensor2{{1}, {3}}, cache);
  EXPECT_DOUBLE_EQ(cache.pre_activation(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(cache.pre_activation(1, 0), 2.0);
  const auto iso = normalized_adjacency(Graph::from_edge_list({}, 1));
  EXPECT_EQ(layer.forward(store, iso, Tensor2{{-2.5}}, cache)(0, 0), 0.0);
  EXPECT_EQ(layer.forward(store, iso, Tensor2{{2.5}}, cache)(0, 0), 2.5);
  EXPECT_THROW(layer.forward(store, iso, Tensor2(1, 2), cache), std::invalid_argument);
}

TEST(SageLayerOp, Examples) {
  Rng rng(3);
  ParamStore store;
  SageLayer layer = SageLayer::create(store, "sage", 1, 1, false, false, rng);
  store[layer.weight_self].value = Tensor2{{1.0}};
  store[layer.weight_neigh].value = Tensor2{{1.0}};
  store[layer.bias].value = Tensor2{{0.0}};
  SageLayer::Cache cache;
  BatchNormState state(1);
  Tensor2 out = layer.forward(store, mean_adjacency(path_graph(2)), Tensor2{{1}, {3}}, false, state, nullptr, cache);
  EXPECT_DOUBLE_EQ(out(0, 0), 4.0);
  out = layer.forward(store, mean_adjacency(Graph::from_edge_list({}, 1)), Tensor2{{-1.5}}, false, state, nullptr,
                      cache);
  EXPECT_DOUBLE_EQ(out(0, 0), -1.5);
}

TEST(GinLayerOp, Examples) {
  Rng rng(4);
  ParamStore store;
  GinLayer layer = GinLayer::create(store, "gin", 1, 4, true, rng);
  EXPECT_EQ(store[layer.eps].value(0, 0), 0.0);
  GinLayer::Cache cache;
  BatchNormState state(4);
  layer.forward(store, sum_adjacency(cycle_graph(3)), Tensor2{{1}, {2}, {3}}, false, state, nullptr, cache);
  EXPECT_DOUBLE_EQ(cache.combined(0, 0), 6.0);
  layer.forward(store, sum_adjacency(Graph::from_edge_list({}, 1)), Tensor2{{0.7}}, false, state, nullptr, cache);
  EXPECT_DOUBLE_EQ(cache.combined(0, 0), 0.7);
}

TEST(SgcHeadOp, PropagationDepth) {
  Rng rng(5);
  ParamStore store;
  SgcHead zero = SgcHead::create(store, 2, 3, 0, rng);
  const Tensor2 x = {{1, 2}, {5, -1}};
  const auto adj = normalized_adjacency(path_graph(2));
  EXPECT_EQ(zero.propagate(adj, x), x);
  SgcHead one = SgcHead::create(store, 2, 3, 1, rng);
  SgcHead two = SgcHead::create(store, 2, 3, 2, rng);
  EXPECT_LT(max_abs_diff(one.propagate(adj, x), two.propagate(adj, x)), 1e-15);
}

TEST(JkConcat, WidthsAndErrors) {
  const std::vector<Tensor2> three(3, Tensor2(4, 128));
  EXPECT_EQ(jk_concat(three).cols(), 384u);
  const std::vector<Tensor2> one = {Tensor2{{1, 2}}};
  EXPECT_EQ(jk_concat(one), one[0]);
  const std::vector<Tensor2> ragged = {Tensor2(2, 1), Tensor2(3, 1)};
  EXPECT_THROW(jk_concat(ragged), std::invalid_argument);
}

TEST(Pooling, Examples) {
  const std::vector<std::size_t> one = {0, 0};
  EXPECT_EQ(global_mean_pool(Tensor2{{1, 2}, {3, 4}}, one, 1), (Tensor2{{2, 3}}));
  const std::vector<std::size_t> two = {0, 1};
  EXPECT_EQ(global_mean_pool(Tensor2{{1, 2}, {3, 4}}, two, 2), (Tensor2{{1, 2}, {3, 4}}));
  EXPECT_THROW(global_mean_pool(Tensor2{{1, 2}, {3, 4}}, one, 2), ConfigError);
}

TEST(Pooling, ExactlyInvariantToRowOrder) {
  Rng rng(6);
  const Tensor2 h = random_tensor(rng, 40, 5);
  const std::vector<std::size_t> ids(40, 0);
  const auto perm = fcgnn::testing::random_permutation(rng, 40);
  EXPECT_EQ(global_mean_pool(h, ids, 1), global_mean_pool(permute_rows(h, perm), ids, 1));
}

// layer(P h, P g) == P layer(h, g) bit for bit.
TEST(Equivariance, EveryLayerTypeExact) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = fcgnn::testing::random_graph(rng, 2, 32, 0.2);
    const auto perm = fcgnn::testing::random_permutation(rng, g.num_nodes());
    const Graph pg = permute(g, perm);
    const Tensor2 h = random_tensor(rng, g.num_nodes(), 4);
    const Tensor2 ph = permute_rows(h, perm);
    ParamStore store;
    const GcnLayer gcn = GcnLayer::create(store, "g", 4, 6, true, rng);
    const SageLayer sage = SageLayer::create(store, "s", 4, 6, true, true, rng);
    const GinLayer gin = GinLayer::create(store, "i", 4, 6, true, rng);
    GcnLayer::Cache gc;
    EXPECT_EQ(permute_rows(gcn.forward(store, normalized_adjacency(g), h, gc), perm),
              gcn.forward(store, normalized_adjacency(pg), ph, gc));
    SageLayer::Cache sc;
    BatchNormState st(6);
    for (bool training : {false, true}) {
      if (training && g.num_nodes() < 2) continue;
      EXPECT_EQ(permute_rows(sage.forward(store, mean_adjacency(g), h, training, st, nullptr, sc), perm),
                sage.forward(store, mean_adjacency(pg), ph, training, st, nullptr, sc));
      GinLayer::Cache ic;
      EXPECT_EQ(permute_rows(gin.forward(store, sum_adjacency(g), h, training, st, nullptr, ic), perm),
                gin.forward(store, sum_adjacency(pg), ph, training, st, nullptr, ic));
    }
  }
}

TEST(ModelConfigTest, ValidationNamesAndJson) {
  for (Architecture a : all_architectures()) {
    EXPECT_EQ(parse_architecture(to_string(a)), a);
    const ModelConfig t = tuned_config(a);
    EXPECT_NO_THROW(t.validate());
    EXPECT_EQ(to_json(model_config_from_json(to_json(t))), to_json(t));
  }
  EXPECT_THROW(parse_architecture("gat"), ConfigError);
  EXPECT_TRUE(is_jumping_knowledge(Architecture::jk_sage));
  EXPECT_FALSE(is_jumping_knowledge(Architecture::sage));
  ModelConfig bad;
  bad.dropout_rate = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.num_layers = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.learning_rate = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  const ModelConfig gcn = tuned_config(Architecture::gcn);
  EXPECT_EQ(gcn.num_layers, 6u);
  EXPECT_EQ(gcn.hidden_dim, 128u);
  EXPECT_DOUBLE_EQ(gcn.learning_rate, 0.001);
}

class EveryArchitecture : public ::testing::TestWithParam<Architecture> {};

TEST_P(EveryArchitecture, UntrainedLogitsFiniteAndSoftmaxNormalized) {
  GnnModel model(small_config(GetParam()), kLdpChannels, 5);
  const std::vector<Graph> graphs = {path_graph(4), cycle_graph(5), fcgnn::testing::star_graph(3)};
  std::vector<Tensor2> feats;
  for (const auto& g : graphs) feats.push_back(ldp_input(g));
  const auto [b, x] = batch(graphs, feats);
  const auto out = model.predict(b, x);
  ASSERT_EQ(out.logits.rows(), 3u);
  ASSERT_EQ(out.logits.cols(), 5u);
  EXPECT_TRUE(out.logits.all_finite());
  EXPECT_EQ(out.embeddings.cols(), model.embedding_dim());
  const Tensor2 p = softmax(out.logits);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (double v : p.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_THROW(model.predict(b, Tensor2(x.rows(), 3)), ConfigError);
}

TEST_P(EveryArchitecture, IsomorphicGraphsGetIdenticalLogits) {
  GnnModel model(small_config(GetParam(), 3), kLdpChannels, 4);
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Graph g = fcgnn::testing::random_graph(rng, 3, 30, 0.2);
    const Graph pg = permute(g, fcgnn::testing::random_permutation(rng, g.num_nodes()));
    const std::vector<Graph> graphs = {g, pg};
    const std::vector<Tensor2> feats = {ldp_input(g), ldp_input(pg)};
    const auto [b, x] = batch(graphs, feats);
    const auto out = model.predict(b, x);
    for (std::size_t c = 0; c < out.logits.cols(); ++c) EXPECT_EQ(out.logits(0, c), out.logits(1, c));
    for (std::size_t c = 0; c < out.embeddings.cols(); ++c) EXPECT_EQ(out.embeddings(0, c), out.embeddings(1, c));
  }
}

TEST_P(EveryArchitecture, BatchedMatchesSingleGraphCalls) {
  GnnModel model(small_config(GetParam()), kLdpChannels, 3);
  const std::vector<Graph> graphs = {path_graph(3), cycle_graph(3)};
  const std::vector<Tensor2> feats = {ldp_input(graphs[0]), ldp_input(graphs[1])};
  const auto [b, x] = batch(graphs, feats);
  const auto together = model.predict(b, x);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto alone = model.predict(single(graphs[i]), feats[i]);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(alone.logits(0, c), together.logits(i, c), 1e-10);
  }
}

TEST_P(EveryArchitecture, FullModelGradientCheck) {
  GnnModel model(small_config(GetParam(), 2, 5), kLdpChannels, 3);
  // Move the running statistics off their defaults so eval-mode BN is not trivial.
  for (auto& s : model.batch_norm_states()) {
    s.running_mean.fill(0.1);
    s.running_var.fill(1.7);
  }
  const std::vector<Graph> graphs = {path_graph(4), cycle_graph(5), fcgnn::testing::star_graph(3)};
  std::vector<Tensor2> feats;
  Rng rng(9);
  jitter_biases(model, rng);
  for (const auto& g : graphs) feats.push_back(random_tensor(rng, g.num_nodes(), kLdpChannels));
  const auto [b, x] = batch(graphs, feats);
  const std::vector<std::size_t> targets = {0, 2, 1};
  auto loss = [&](bool backward) {
    std::shared_ptr<GnnModel::Tape> tape;
    const auto out = model.forward(b, x, GnnModel::Mode::eval, nullptr, backward ? &tape : nullptr);
    const auto r = softmax_cross_entropy(out.logits, targets);
    if (backward) model.backward(*tape, r.dlogits);
    return r.loss;
  };
  GradCheckOptions opts;
  opts.full_check_limit = 100000;
  EXPECT_LT(grad_check(loss, model.params(), opts).max_relative_error, 1e-4);
}

// Biases feeding a training-mode batch norm have an exactly zero gradient, so
// the comparison here allows a tiny absolute slack on top of the relative
// bound.
TEST_P(EveryArchitecture, TrainingModeGradientsMatchFiniteDifferences) {
  GnnModel model(small_config(GetParam(), 2, 4), kLdpChannels, 3);
  const std::vector<Graph> graphs = {path_graph(4), cycle_graph(5), fcgnn::testing::star_graph(3)};
  std::vector<Tensor2> feats;
  Rng rng(10);
  jitter_biases(model, rng);
  for (const auto& g : graphs) feats.push_back(random_tensor(rng, g.num_nodes(), kLdpChannels));
  const auto [b, x] = batch(graphs, feats);
  const std::vector<std::size_t> targets = {1, 0, 2};
  const auto bn_before = model.batch_norm_states();
  auto loss = [&]() {
    const auto out = model.forward(b, x, GnnModel::Mode::train, nullptr);
    model.batch_norm_states() = bn_before;
    return softmax_cross_entropy(out.logits, targets).loss;
  };
  std::shared_ptr<GnnModel::Tape> tape;
  const auto out = model.forward(b, x, GnnModel::Mode::train, nullptr, &tape);
  model.batch_norm_states() = bn_before;
  model.backward(*tape, softmax_cross_entropy(out.logits, targets).dlogits);
  constexpr double kStep = 1e-5;
  for (auto& p : model.params().all()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.values()[i];
      p.value.values()[i] = orig + kStep;
      const double up = loss();
      p.value.values()[i] = orig - kStep;
      const double down = loss();
      p.value.values()[i] = orig;
      const double fd = (up - down) / (2 * kStep);
      const double analytic = p.grad.values()[i];
      EXPECT_LE(std::abs(fd - analytic), 1e-4 * std::max(std::abs(fd), std::abs(analytic)) + 1e-9)
          << p.name << "[" << i << "]";
    }
  }
}

TEST_P(EveryArchitecture, CheckpointRoundTripIsExact) {
  GnnModel model(small_config(GetParam()), kLdpChannels, 4);
  for (auto& s : model.batch_norm_states()) s.running_var.fill(2.5);
  const Checkpoint ckpt = model.to_checkpoint();
  const GnnModel back = GnnModel::from_checkpoint(ckpt);
  EXPECT_EQ(to_json(back.config()), to_json(model.config()));
  ASSERT_EQ(back.params().size(), model.params().size());
  for (std::size_t i = 0; i < model.params().size(); ++i) EXPECT_EQ(back.params()[i].value, model.params()[i].value);
  ASSERT_EQ(back.batch_norm_states().size(), model.batch_norm_states().size());
  for (std::size_t i = 0; i < model.batch_norm_states().size(); ++i) {
    EXPECT_EQ(back.batch_norm_states()[i].running_var, model.batch_norm_states()[i].running_var);
  }
  const Graph g = cycle_graph(6);
  EXPECT_EQ(back.predict(single(g), ldp_input(g)).logits, model.predict(single(g), ldp_input(g)).logits);

  Checkpoint broken = ckpt;
  broken.tensors[0].second = Tensor2(7, 7);
  EXPECT_THROW(GnnModel::from_checkpoint(broken), DataError);
  broken = ckpt;
  broken.tensors.pop_back();
  EXPECT_THROW(GnnModel::from_checkpoint(broken), DataError);
  broken = ckpt;
  broken.descriptor["format"] = "other";
  EXPECT_THROW(GnnModel::from_checkpoint(broken), DataError);
}

INSTANTIATE_TEST_SUITE_P(Gnn, EveryArchitecture, ::testing::ValuesIn(all_architectures()),
                         [](const ::testing::TestParamInfo<Architecture>& info) {
                           std::string name(to_string(info.param));
                           for (char& c : name) {
                             if (c == '-') c = '_';
                           }
                           return name;
                         });

TEST(GnnModelTest, JkEmbeddingWidthIsHidden) {
  GnnModel model(small_config(Architecture::jk_gcn, 3, 16), kLdpChannels, 5);
  EXPECT_EQ(model.embedding_dim(), 16u);
  GnnModel sgc(small_config(Architecture::sgc, 3, 16), kLdpChannels, 5);
  EXPECT_EQ(sgc.embedding_dim(), kLdpChannels);
}

TEST(GnnModelTest, SameSeedSameInitialization) {
  GnnModel a(small_config(Architecture::gin), kLdpChannels, 5);
  GnnModel b(small_config(Architecture::gin), kLdpChannels, 5);
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].value, b.params()[i].value);
  EXPECT_THROW(GnnModel(small_config(Architecture::gcn), kLdpChannels, 1), ConfigError);
}
