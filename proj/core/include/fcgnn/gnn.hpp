#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcgnn/checkpoint.hpp"
#include "fcgnn/graph.hpp"
#include "fcgnn/ops.hpp"
#include "fcgnn/param.hpp"
#include "fcgnn/rng.hpp"
#include "fcgnn/tensor.hpp"

namespace fcgnn {

// ---------------------------------------------------------------------------
// Batching and sparse propagation
// ---------------------------------------------------------------------------

// Block-diagonal union of several graphs. graph_id is non-decreasing and no
// edge crosses a graph boundary.
struct BatchedGraph {
  Graph merged;
  std::vector<std::size_t> graph_id;
  std::vector<std::size_t> node_offsets;  // num_graphs + 1 entries
  std::size_t num_graphs = 0;
};

BatchedGraph batch_graphs(std::span<const Graph* const> graphs);

// Merges graphs and stacks their feature rows in the same order.
std::pair<BatchedGraph, Tensor2> batch(std::span<const Graph> graphs, std::span<const Tensor2> features);

Tensor2 stack_rows(std::span<const Tensor2* const> blocks);

// Sparse square operator in CSR form.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(std::size_t n, std::vector<std::uint64_t> offsets, std::vector<NodeId> cols,
                 std::vector<double> values);

  std::size_t size() const { return n_; }
  double at(std::size_t row, std::size_t col) const;

  // out = S h. Each row's terms are summed in an order fixed by the term
  // weights and the contributing rows of h, so relabeling the nodes permutes
  // the output rows without changing a single bit.
  Tensor2 apply(const Tensor2& h) const;
  // out = S^T h.
  Tensor2 apply_transpose(const Tensor2& h) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> offsets_;
  std::vector<NodeId> cols_;
  std::vector<double> values_;
};

// D^-1/2 (A + I) D^-1/2 with D the degree of A + I.
SparseOperator normalized_adjacency(const Graph& g);
// Row-normalized adjacency; rows of isolated nodes are empty.
SparseOperator mean_adjacency(const Graph& g);
// Plain 0/1 adjacency.
SparseOperator sum_adjacency(const Graph& g);

// Row g = mean of the rows of h with graph_id == g, summed in lexicographic
// row order. Throws ConfigError for a graph without nodes.
Tensor2 global_mean_pool(const Tensor2& h, std::span<const std::size_t> graph_id, std::size_t num_graphs);
Tensor2 global_mean_pool_backward(const Tensor2& dpooled, std::span<const std::size_t> graph_id,
                                  std::size_t num_graphs);

// Column-wise concatenation of per-layer node representations.
Tensor2 jk_concat(std::span<const Tensor2> per_layer);

// ---------------------------------------------------------------------------
// Message-passing layers
// ---------------------------------------------------------------------------

// out = act(S h W + b), S the GCN-normalized adjacency.
struct GcnLayer {
  ParamId weight = 0;
  ParamId bias = 0;
  bool activate = true;

  struct Cache {
    Tensor2 aggregated;
    Tensor2 pre_activation;
  };

  static GcnLayer create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                         bool activate, Rng& rng);
  Tensor2 forward(const ParamStore& store, const SparseOperator& adj, const Tensor2& h, Cache& cache) const;
  Tensor2 backward(ParamStore& store, const SparseOperator& adj, const Cache& cache, const Tensor2& dout) const;
};

// out = act(BN(h W_self + mean_{N(v)}(h) W_neigh + b)). Isolated nodes
// contribute a zero neighborhood mean.
struct SageLayer {
  ParamId weight_self = 0;
  ParamId weight_neigh = 0;
  ParamId bias = 0;
  bool batch_norm = true;
  ParamId bn_gamma = 0;
  ParamId bn_beta = 0;
  bool activate = true;

  struct Cache {
    Tensor2 input;
    Tensor2 neighbor_mean;
    Tensor2 pre_norm;
    BatchNormCache bn;
    Tensor2 pre_activation;
  };

  static SageLayer create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                          bool batch_norm, bool activate, Rng& rng);
  // `bn_update` receives batch statistics in training mode; null leaves the
  // running statistics untouched.
  Tensor2 forward(const ParamStore& store, const SparseOperator& mean_adj, const Tensor2& h, bool training,
                  const BatchNormState& bn_state, BatchNormState* bn_update, Cache& cache) const;
  Tensor2 backward(ParamStore& store, const SparseOperator& mean_adj, const Cache& cache,
                   const Tensor2& dout) const;
};

// out = act(MLP((1 + eps) h_v + sum_{N(v)} h_u)) with MLP = affine, BN, ReLU,
// affine. eps is a trainable scalar initialized to 0.
struct GinLayer {
  ParamId eps = 0;
  ParamId weight1 = 0;
  ParamId bias1 = 0;
  ParamId bn_gamma = 0;
  ParamId bn_beta = 0;
  ParamId weight2 = 0;
  ParamId bias2 = 0;
  bool activate = true;

  struct Cache {
    Tensor2 input;
    Tensor2 combined;
    Tensor2 hidden_pre;
    BatchNormCache bn;
    Tensor2 hidden_norm;
    Tensor2 hidden;
    Tensor2 pre_activation;
  };

  static GinLayer create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                         bool activate, Rng& rng);
  // Batch-norm arguments as for SageLayer::forward.
  Tensor2 forward(const ParamStore& store, const SparseOperator& sum_adj, const Tensor2& h, bool training,
                  const BatchNormState& bn_state, BatchNormState* bn_update, Cache& cache) const;
  Tensor2 backward(ParamStore& store, const SparseOperator& sum_adj, const Cache& cache, const Tensor2& dout) const;
};

// logits = pool(S^K x) W + b with no nonlinearity anywhere.
struct SgcHead {
  ParamId weight = 0;
  ParamId bias = 0;
  std::size_t hops = 0;

  static SgcHead create(ParamStore& store, std::size_t in, std::size_t classes, std::size_t hops, Rng& rng);
  Tensor2 propagate(const SparseOperator& adj, const Tensor2& x) const;
};

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

enum class Architecture { gcn, sage, gin, sgc, jk_gcn, jk_sage, jk_gin };

std::string_view to_string(Architecture arch);
// Throws ConfigError for unknown names.
Architecture parse_architecture(std::string_view name);
bool is_jumping_knowledge(Architecture arch);
const std::vector<Architecture>& all_architectures();

struct ModelConfig {
  Architecture architecture = Architecture::gcn;
  std::size_t num_layers = 6;  // propagation depth K for SGC
  std::size_t hidden_dim = 128;
  double learning_rate = 0.001;
  double weight_decay = 0.0;
  double dropout_rate = 0.5;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;

  // Throws ConfigError when a field is out of range.
  void validate() const;
};

// Best grid values per architecture from the published GNN tuning table.
ModelConfig tuned_config(Architecture arch);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Graph-level classifier: L message-passing layers (optionally combined by
// jumping-knowledge concatenation and an affine map back to hidden width),
// global mean pooling, then affine -> ReLU -> dropout -> affine. SGC instead
// pools the K-hop propagated inputs and applies a single affine map.
class GnnModel {
 public:
  GnnModel(const ModelConfig& config, std::size_t input_dim, std::size_t num_classes);

  const ModelConfig& config() const { return config_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t embedding_dim() const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::vector<BatchNormState>& batch_norm_states() { return bn_states_; }
  const std::vector<BatchNormState>& batch_norm_states() const { return bn_states_; }

  struct Output {
    Tensor2 logits;      // num_graphs x classes
    Tensor2 embeddings;  // pooled representation fed to the classifier
  };

  // Opaque record of one forward pass, consumed by backward().
  struct Tape;

  // Training mode applies dropout with `rng` and batch statistics (updating
  // the running estimates). Eval mode is deterministic and never touches
  // model state. Pass a tape to enable backward().
  enum class Mode { train, eval };
  Output forward(const BatchedGraph& batch, const Tensor2& x, Mode mode, Rng* rng,
                 std::shared_ptr<Tape>* tape = nullptr);

  Output predict(const BatchedGraph& batch, const Tensor2& x) const;

  // Accumulates parameter gradients for dL/dlogits.
  void backward(const Tape& tape, const Tensor2& dlogits);

  Checkpoint to_checkpoint() const;
  // Model tensors come first in a fixed order; trailing tensors are ignored.
  // Throws DataError when the descriptor or tensors do not describe a model.
  static GnnModel from_checkpoint(const Checkpoint& ckpt);

 private:
  Output run(const BatchedGraph& batch, const Tensor2& x, bool training, Rng* rng, Tape* tape,
             std::vector<BatchNormState>* bn_update) const;

  ModelConfig config_;
  std::size_t input_dim_;
  std::size_t num_classes_;
  ParamStore params_;
  std::vector<GcnLayer> gcn_;
  std::vector<SageLayer> sage_;
  std::vector<GinLayer> gin_;
  std::vector<BatchNormState> bn_states_;
  SgcHead sgc_;
  ParamId jk_weight_ = 0;
  ParamId jk_bias_ = 0;
  ParamId head1_weight_ = 0;
  ParamId head1_bias_ = 0;
  ParamId head2_weight_ = 0;
  ParamId head2_bias_ = 0;
};

}  // namespace fcgnn
