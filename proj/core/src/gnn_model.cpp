#include <cmath>
#include <stdexcept>

#include "fcgnn/error.hpp"
#include "fcgnn/gnn.hpp"

namespace fcgnn {

namespace {

struct ArchName {
  Architecture arch;
  std::string_view name;
};

constexpr ArchName kArchNames[] = {
    {Architecture::gcn, "gcn"},       {Architecture::sage, "sage"},       {Architecture::gin, "gin"},
    {Architecture::sgc, "sgc"},       {Architecture::jk_gcn, "jk-gcn"},   {Architecture::jk_sage, "jk-sage"},
    {Architecture::jk_gin, "jk-gin"},
};

enum class LayerKind { gcn, sage, gin, sgc };

LayerKind layer_kind(Architecture arch) {
  switch (arch) {
    case Architecture::gcn:
    case Architecture::jk_gcn: return LayerKind::gcn;
    case Architecture::sage:
    case Architecture::jk_sage: return LayerKind::sage;
    case Architecture::gin:
    case Architecture::jk_gin: return LayerKind::gin;
    case Architecture::sgc: return LayerKind::sgc;
  }
  throw std::logic_error("unknown architecture");
}

}  // namespace

std::string_view to_string(Architecture arch) {
  for (const auto& entry : kArchNames) {
    if (entry.arch == arch) return entry.name;
  }
  throw std::logic_error("unknown architecture");
}

Architecture parse_architecture(std::string_view name) {
  for (const auto& entry : kArchNames) {
    if (entry.name == name) return entry.arch;
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

bool is_jumping_knowledge(Architecture arch) {
  return arch == Architecture::jk_gcn || arch == Architecture::jk_sage || arch == Architecture::jk_gin;
}

const std::vector<Architecture>& all_architectures() {
  static const std::vector<Architecture> archs = {Architecture::gcn,    Architecture::sage,    Architecture::gin,
                                                  Architecture::sgc,    Architecture::jk_gcn,  Architecture::jk_sage,
                                                  Architecture::jk_gin};
  return archs;
}

void ModelConfig::validate() const {
  if (num_layers < 1) throw ConfigError("number of layers must be at least 1");
  if (hidden_dim < 1) throw ConfigError("hidden dimension must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight decay must be non-negative");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
}

ModelConfig tuned_config(Architecture arch) {
  ModelConfig c;
  c.architecture = arch;
  c.learning_rate = 0.001;
  switch (arch) {
    case Architecture::gcn: c.num_layers = 6; c.hidden_dim = 128; break;
    case Architecture::sage: c.num_layers = 6; c.hidden_dim = 64; break;
    case Architecture::gin: c.num_layers = 6; c.hidden_dim = 64; break;
    case Architecture::sgc: c.num_layers = 5; c.hidden_dim = 128; break;
    case Architecture::jk_gcn:
    case Architecture::jk_sage:
    case Architecture::jk_gin: c.num_layers = 6; c.hidden_dim = 128; break;
  }
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"architecture", std::string(to_string(c.architecture))},
          {"num_layers", c.num_layers},
          {"hidden_dim", c.hidden_dim},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"dropout_rate", c.dropout_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.architecture = parse_architecture(j.at("architecture").get<std::string>());
    c.num_layers = j.at("num_layers").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

struct GnnModel::Tape {
  SparseOperator adjacency;
  std::vector<std::size_t> graph_id;
  std::size_t num_graphs = 0;
  std::vector<GcnLayer::Cache> gcn;
  std::vector<SageLayer::Cache> sage;
  std::vector<GinLayer::Cache> gin;
  std::vector<Tensor2> layer_outputs;
  Tensor2 jk_input;
  Tensor2 pooled;
  Tensor2 head_pre;
  DropoutMask head_mask;
  Tensor2 head_dropped;
};

GnnModel::GnnModel(const ModelConfig& config, std::size_t input_dim, std::size_t num_classes)
    : config_(config), input_dim_(input_dim), num_classes_(num_classes) {
  config_.validate();
  if (input_dim < 1) throw ConfigError("input dimension must be at least 1");
  if (num_classes < 2) throw ConfigError("a classifier needs at least 2 classes");
  Rng rng(derive_seed(config_.seed, "init"));
  const std::size_t layers = config_.num_layers;
  const std::size_t hidden = config_.hidden_dim;
  const LayerKind kind = layer_kind(config_.architecture);

  if (kind == LayerKind::sgc) {
    sgc_ = SgcHead::create(params_, input_dim_, num_classes_, layers, rng);
    return;
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    const std::size_t in = l == 0 ? input_dim_ : hidden;
    const bool activate = l + 1 < layers;
    switch (kind) {
      case LayerKind::gcn: gcn_.push_back(GcnLayer::create(params_, prefix, in, hidden, activate, rng)); break;
      case LayerKind::sage:
        sage_.push_back(SageLayer::create(params_, prefix, in, hidden, true, activate, rng));
        bn_states_.emplace_back(hidden);
        break;
      case LayerKind::gin:
        gin_.push_back(GinLayer::create(params_, prefix, in, hidden, activate, rng));
        bn_states_.emplace_back(hidden);
        break;
      case LayerKind::sgc: break;
    }
  }
  if (is_jumping_knowledge(config_.architecture)) {
    jk_weight_ = params_.add("jk.weight", glorot_init(layers * hidden, hidden, rng));
    jk_bias_ = params_.add("jk.bias", Tensor2(1, hidden, 0.0));
  }
  head1_weight_ = params_.add("head1.weight", glorot_init(hidden, hidden, rng));
  head1_bias_ = params_.add("head1.bias", Tensor2(1, hidden, 0.0));
  head2_weight_ = params_.add("head2.weight", glorot_init(hidden, num_classes_, rng));
  head2_bias_ = params_.add("head2.bias", Tensor2(1, num_classes_, 0.0));
}

std::size_t GnnModel::embedding_dim() const {
  return config_.architecture == Architecture::sgc ? input_dim_ : config_.hidden_dim;
}

GnnModel::Output GnnModel::forward(const BatchedGraph& batch, const Tensor2& x, Mode mode, Rng* rng,
                                   std::shared_ptr<Tape>* tape) {
  std::shared_ptr<Tape> record;
  if (tape != nullptr) record = std::make_shared<Tape>();
  const bool training = mode == Mode::train;
  Output out = run(batch, x, training, rng, record.get(), training ? &bn_states_ : nullptr);
  if (tape != nullptr) *tape = std::move(record);
  return out;
}

GnnModel::Output GnnModel::predict(const BatchedGraph& batch, const Tensor2& x) const {
  return run(batch, x, false, nullptr, nullptr, nullptr);
}

GnnModel::Output GnnModel::run(const BatchedGraph& batch, const Tensor2& x, bool training, Rng* rng, Tape* tape,
                               std::vector<BatchNormState>* bn_update) const {
  if (x.cols() != input_dim_) {
    throw ConfigError("model expects " + std::to_string(input_dim_) + " input features, got " +
                      std::to_string(x.cols()));
  }
  if (x.rows() != batch.merged.num_nodes()) {
    throw std::invalid_argument("feature rows do not match batch node count");
  }
  if (training && config_.dropout_rate > 0.0 && rng == nullptr) {
    throw std::invalid_argument("training forward with dropout needs an rng");
  }
  Tape local;
  Tape& t = tape != nullptr ? *tape : local;
  const LayerKind kind = layer_kind(config_.architecture);
  switch (kind) {
    case LayerKind::gcn:
    case LayerKind::sgc: t.adjacency = normalized_adjacency(batch.merged); break;
    case LayerKind::sage: t.adjacency = mean_adjacency(batch.merged); break;
    case LayerKind::gin: t.adjacency = sum_adjacency(batch.merged); break;
  }
  t.graph_id = batch.graph_id;
  t.num_graphs = batch.num_graphs;

  Output out;
  if (kind == LayerKind::sgc) {
    t.pooled = global_mean_pool(sgc_.propagate(t.adjacency, x), batch.graph_id, batch.num_graphs);
    out.logits = affine_forward(t.pooled, params_[sgc_.weight], params_[sgc_.bias]);
    out.embeddings = t.pooled;
    return out;
  }

  const std::size_t layers = config_.num_layers;
  t.layer_outputs.clear();
  t.gcn.assign(gcn_.size(), {});
  t.sage.assign(sage_.size(), {});
  t.gin.assign(gin_.size(), {});
  const Tensor2* h = &x;
  for (std::size_t l = 0; l < layers; ++l) {
    Tensor2 next;
    switch (kind) {
      case LayerKind::gcn: next = gcn_[l].forward(params_, t.adjacency, *h, t.gcn[l]); break;
      case LayerKind::sage:
        next = sage_[l].forward(params_, t.adjacency, *h, training, bn_states_[l],
                                bn_update != nullptr ? &(*bn_update)[l] : nullptr, t.sage[l]);
        break;
      case LayerKind::gin:
        next = gin_[l].forward(params_, t.adjacency, *h, training, bn_states_[l],
                               bn_update != nullptr ? &(*bn_update)[l] : nullptr, t.gin[l]);
        break;
      case LayerKind::sgc: break;
    }
    t.layer_outputs.push_back(std::move(next));
    h = &t.layer_outputs.back();
  }

  if (is_jumping_knowledge(config_.architecture)) {
    // Pooling is linear, so the JK map is applied to pooled concatenations
    // rather than to every node.
    t.jk_input = global_mean_pool(jk_concat(t.layer_outputs), batch.graph_id, batch.num_graphs);
    t.pooled = affine_forward(t.jk_input, params_[jk_weight_], params_[jk_bias_]);
  } else {
    t.pooled = global_mean_pool(t.layer_outputs.back(), batch.graph_id, batch.num_graphs);
  }
  t.head_pre = affine_forward(t.pooled, params_[head1_weight_], params_[head1_bias_]);
  Rng unused(0);
  t.head_dropped =
      dropout_forward(relu_forward(t.head_pre), config_.dropout_rate, rng != nullptr ? *rng : unused, training,
                      t.head_mask);
  out.logits = affine_forward(t.head_dropped, params_[head2_weight_], params_[head2_bias_]);
  out.embeddings = t.pooled;
  return out;
}

void GnnModel::backward(const Tape& t, const Tensor2& dlogits) {
  if (config_.architecture == Architecture::sgc) {
    affine_backward(t.pooled, dlogits, params_[sgc_.weight], params_[sgc_.bias]);
    return;
  }
  const Tensor2 ddropped = affine_backward(t.head_dropped, dlogits, params_[head2_weight_], params_[head2_bias_]);
  const Tensor2 dhead = relu_backward(t.head_pre, dropout_backward(t.head_mask, ddropped));
  const Tensor2 dpooled = affine_backward(t.pooled, dhead, params_[head1_weight_], params_[head1_bias_]);
  const std::size_t layers = config_.num_layers;
  std::vector<Tensor2> jk_grads;
  Tensor2 dh;
  if (is_jumping_knowledge(config_.architecture)) {
    const Tensor2 djk = affine_backward(t.jk_input, dpooled, params_[jk_weight_], params_[jk_bias_]);
    const std::vector<std::size_t> widths(layers, config_.hidden_dim);
    jk_grads = hsplit(global_mean_pool_backward(djk, t.graph_id, t.num_graphs), widths);
    dh = std::move(jk_grads.back());
  } else {
    dh = global_mean_pool_backward(dpooled, t.graph_id, t.num_graphs);
  }
  const LayerKind kind = layer_kind(config_.architecture);
  for (std::size_t l = layers; l-- > 0;) {
    Tensor2 dprev;
    switch (kind) {
      case LayerKind::gcn: dprev = gcn_[l].backward(params_, t.adjacency, t.gcn[l], dh); break;
      case LayerKind::sage: dprev = sage_[l].backward(params_, t.adjacency, t.sage[l], dh); break;
      case LayerKind::gin: dprev = gin_[l].backward(params_, t.adjacency, t.gin[l], dh); break;
      case LayerKind::sgc: break;
    }
    if (l == 0) break;
    dh = std::move(dprev);
    if (!jk_grads.empty()) add_inplace(dh, jk_grads[l - 1]);
  }
}

// ---------------------------------------------------------------------------

Checkpoint GnnModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.descriptor = {{"format", "fcgnn.gnn"},
                     {"config", to_json(config_)},
                     {"input_dim", input_dim_},
                     {"num_classes", num_classes_}};
  for (const auto& p : params_.all()) ckpt.tensors.emplace_back(p.name, p.value);
  for (std::size_t i = 0; i < bn_states_.size(); ++i) {
    ckpt.tensors.emplace_back("bn" + std::to_string(i) + ".running_mean", bn_states_[i].running_mean);
    ckpt.tensors.emplace_back("bn" + std::to_string(i) + ".running_var", bn_states_[i].running_var);
  }
  return ckpt;
}

GnnModel GnnModel::from_checkpoint(const Checkpoint& ckpt) {
  const auto& d = ckpt.descriptor;
  if (!d.is_object() || d.value("format", "") != "fcgnn.gnn") throw DataError("checkpoint does not hold a GNN model");
  ModelConfig config;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  try {
    config = model_config_from_json(d.at("config"));
    input_dim = d.at("input_dim").get<std::size_t>();
    num_classes = d.at("num_classes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed GNN checkpoint descriptor: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed GNN checkpoint descriptor: ") + e.what());
  }
  GnnModel model(config, input_dim, num_classes);
  const std::size_t expected = model.params_.size() + 2 * model.bn_states_.size();
  if (ckpt.tensors.size() < expected) throw DataError("checkpoint holds too few tensors for its architecture");
  std::size_t k = 0;
  auto take = [&](const std::string& name, Tensor2& dst) {
    const auto& [n, t] = ckpt.tensors[k++];
    if (n != name || !t.same_shape(dst)) throw DataError("checkpoint tensor '" + n + "' does not match '" + name + "'");
    if (!t.all_finite()) throw DataError("checkpoint tensor '" + n + "' has non-finite values");
    dst = t;
  };
  for (auto& p : model.params_.all()) take(p.name, p.value);
  for (std::size_t i = 0; i < model.bn_states_.size(); ++i) {
    take("bn" + std::to_string(i) + ".running_mean", model.bn_states_[i].running_mean);
    take("bn" + std::to_string(i) + ".running_var", model.bn_states_[i].running_var);
  }
  return model;
}

}  // namespace fcgnn
