#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "fcgnn/dataset.hpp"
#include "fcgnn/features.hpp"
#include "fcgnn/gnn.hpp"
#include "fcgnn/ops.hpp"
#include "fcgnn/param.hpp"

using namespace fcgnn;

namespace {

Tensor2 random_tensor(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

const LabeledGraphSet& corpus() {
  static const LabeledGraphSet set = synth_families(20, 1);
  return set;
}

// Batch of the first `count` synthetic graphs with standardized LDP features.
std::pair<BatchedGraph, Tensor2> sample_batch(std::size_t count) {
  const auto& set = corpus();
  const std::span<const Graph> graphs(set.graphs.data(), count);
  const LdpStats stats = fit_ldp_stats(graphs);
  std::vector<Tensor2> feats;
  for (const auto& g : graphs) feats.push_back(ldp_node_features(g, stats));
  return batch(graphs, feats);
}

}  // namespace

static void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor2 a = random_tensor(rng, n, n);
  const Tensor2 b = random_tensor(rng, n, n);
  for (auto _ : state) {
    Tensor2 c(n, n);
    gemm_accumulate(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(64)->Arg(128)->Arg(256);

// Tall-skinny shape typical of a batch of graphs times a layer weight.
static void BM_GemmTall(benchmark::State& state) {
  Rng rng(2);
  const Tensor2 a = random_tensor(rng, 4096, 128);
  const Tensor2 b = random_tensor(rng, 128, 128);
  for (auto _ : state) {
    Tensor2 c(4096, 128);
    gemm_accumulate(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_GemmTall);

static void BM_SparseApply(benchmark::State& state) {
  const auto [b, x] = sample_batch(32);
  const SparseOperator adj = normalized_adjacency(b.merged);
  Rng rng(3);
  const Tensor2 h = random_tensor(rng, b.merged.num_nodes(), static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(adj.apply(h));
  state.counters["nodes"] = static_cast<double>(b.merged.num_nodes());
}
BENCHMARK(BM_SparseApply)->Arg(64)->Arg(128);

static void BM_Ldp(benchmark::State& state) {
  const auto [b, x] = sample_batch(32);
  for (auto _ : state) benchmark::DoNotOptimize(ldp(b.merged));
}
BENCHMARK(BM_Ldp);

static void BM_WlRefine(benchmark::State& state) {
  const auto [b, x] = sample_batch(32);
  for (auto _ : state) {
    WlLabelTable table;
    benchmark::DoNotOptimize(wl_refine(b.merged, 2, table));
  }
}
BENCHMARK(BM_WlRefine);

// One optimizer step on a batch of 32 graphs with the tuned configuration.
static void BM_TrainStep(benchmark::State& state) {
  const auto arch = all_architectures()[static_cast<std::size_t>(state.range(0))];
  state.SetLabel(std::string(to_string(arch)));
  const auto [b, x] = sample_batch(32);
  const auto& labels = corpus().labels;
  const std::vector<std::size_t> targets(labels.begin(), labels.begin() + 32);
  const ModelConfig config = tuned_config(arch);
  GnnModel model(config, kLdpChannels, corpus().class_names.size());
  AdamOptions adam;
  adam.learning_rate = config.learning_rate;
  adam.weight_decay = config.weight_decay;
  Rng rng(4);
  for (auto _ : state) {
    std::shared_ptr<GnnModel::Tape> tape;
    const auto out = model.forward(b, x, GnnModel::Mode::train, &rng, &tape);
    const auto loss = softmax_cross_entropy(out.logits, targets);
    model.backward(*tape, loss.dlogits);
    adam_step(model.params(), adam);
  }
}
BENCHMARK(BM_TrainStep)->DenseRange(0, 6)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
