#include "fcgnn/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "fcgnn/error.hpp"
#include "fcgnn/ops.hpp"

namespace fcgnn {

namespace {

constexpr std::pair<BaselineKind, std::string_view> kKindNames[] = {
    {BaselineKind::mlp, "mlp"}, {BaselineKind::wl, "wl"}, {BaselineKind::feather, "feather"}};

std::vector<std::size_t> gather_labels(std::span<const std::size_t> labels, std::span<const std::size_t> idx) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    if (i >= labels.size()) throw std::out_of_range("row index " + std::to_string(i) + " out of range");
    out.push_back(labels[i]);
  }
  return out;
}

void require_two_classes(std::span<const std::size_t> labels, std::span<const std::size_t> train_idx) {
  if (train_idx.empty()) throw ConfigError("training split is empty");
  const std::size_t first = labels[train_idx[0]];
  for (std::size_t i : train_idx) {
    if (labels[i] != first) return;
  }
  throw DataError("training set contains a single class");
}

SparseRows gather_sparse(const SparseRows& x, std::span<const std::size_t> idx) {
  SparseRows out;
  out.cols = x.cols;
  for (std::size_t i : idx) out.rows.push_back(x.rows.at(i));
  return out;
}

}  // namespace

std::string_view to_string(BaselineKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  throw std::logic_error("unknown baseline kind");
}

BaselineKind parse_baseline_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown baseline '" + std::string(name) + "'");
}

bool is_baseline_name(std::string_view name) {
  return std::any_of(std::begin(kKindNames), std::end(kKindNames), [&](const auto& e) { return e.second == name; });
}

void BaselineConfig::validate() const {
  if (mlp.layers < 1) throw ConfigError("MLP needs at least 1 layer");
  if (mlp.hidden < 1) throw ConfigError("MLP hidden width must be at least 1");
  if (!(mlp.learning_rate > 0.0) || !std::isfinite(mlp.learning_rate)) throw ConfigError("learning rate must be positive");
  if (!(mlp.weight_decay >= 0.0) || !std::isfinite(mlp.weight_decay)) throw ConfigError("weight decay must be non-negative");
  if (!(mlp.dropout_rate >= 0.0 && mlp.dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (mlp.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (mlp.bins < 2) throw ConfigError("histogram needs at least 2 bins");
  if (!(logistic.learning_rate > 0.0) || !std::isfinite(logistic.learning_rate)) {
    throw ConfigError("logistic learning rate must be positive");
  }
  if (!(logistic.l2 >= 0.0) || !std::isfinite(logistic.l2)) throw ConfigError("l2 penalty must be non-negative");
  if (!(logistic.tolerance >= 0.0)) throw ConfigError("tolerance must be non-negative");
  if (feather_order < 1) throw ConfigError("FEATHER order must be at least 1");
}

nlohmann::json to_json(const BaselineConfig& c) {
  return {{"kind", std::string(to_string(c.kind))},
          {"mlp",
           {{"layers", c.mlp.layers},
            {"hidden", c.mlp.hidden},
            {"learning_rate", c.mlp.learning_rate},
            {"weight_decay", c.mlp.weight_decay},
            {"dropout_rate", c.mlp.dropout_rate},
            {"epochs", c.mlp.epochs},
            {"batch_size", c.mlp.batch_size},
            {"bins", c.mlp.bins}}},
          {"logistic",
           {{"learning_rate", c.logistic.learning_rate},
            {"l2", c.logistic.l2},
            {"max_epochs", c.logistic.max_epochs},
            {"tolerance", c.logistic.tolerance}}},
          {"wl_iterations", c.wl_iterations},
          {"feather_order", c.feather_order},
          {"seed", c.seed}};
}

BaselineConfig baseline_config_from_json(const nlohmann::json& j) {
  BaselineConfig c;
  try {
    c.kind = parse_baseline_kind(j.at("kind").get<std::string>());
    const auto& m = j.at("mlp");
    c.mlp.layers = m.at("layers").get<std::size_t>();
    c.mlp.hidden = m.at("hidden").get<std::size_t>();
    c.mlp.learning_rate = m.at("learning_rate").get<double>();
    c.mlp.weight_decay = m.at("weight_decay").get<double>();
    c.mlp.dropout_rate = m.at("dropout_rate").get<double>();
    c.mlp.epochs = m.at("epochs").get<std::size_t>();
    c.mlp.batch_size = m.at("batch_size").get<std::size_t>();
    c.mlp.bins = m.at("bins").get<std::size_t>();
    const auto& l = j.at("logistic");
    c.logistic.learning_rate = l.at("learning_rate").get<double>();
    c.logistic.l2 = l.at("l2").get<double>();
    c.logistic.max_epochs = l.at("max_epochs").get<std::size_t>();
    c.logistic.tolerance = l.at("tolerance").get<double>();
    c.wl_iterations = j.at("wl_iterations").get<std::uint32_t>();
    c.feather_order = j.at("feather_order").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid baseline config: ") + e.what());
  }
  c.validate();
  return c;
}

SparseRows SparseRows::from_dense(const Tensor2& dense) {
  SparseRows out;
  out.cols = dense.cols();
  out.rows.resize(dense.rows());
  for (std::size_t i = 0; i < dense.rows(); ++i) {
    for (std::size_t j = 0; j < dense.cols(); ++j) {
      if (dense(i, j) != 0.0) out.rows[i].emplace_back(static_cast<std::uint32_t>(j), dense(i, j));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// MLP

Mlp::Mlp(std::size_t input_dim, std::size_t num_classes, const MlpConfig& config, std::uint64_t seed)
    : input_dim_(input_dim), num_classes_(num_classes), dropout_rate_(config.dropout_rate) {
  if (input_dim < 1 || num_classes < 2) throw ConfigError("MLP needs input features and at least 2 classes");
  if (config.layers < 1 || config.hidden < 1) throw ConfigError("MLP needs at least one layer of positive width");
  Rng rng(derive_seed(seed, "init"));
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t out = l + 1 == config.layers ? num_classes : config.hidden;
    const std::string prefix = "mlp" + std::to_string(l);
    const ParamId w = params_.add(prefix + ".weight", glorot_init(in, out, rng));
    const ParamId b = params_.add(prefix + ".bias", Tensor2(1, out, 0.0));
    layers_.emplace_back(w, b);
    in = out;
  }
}

Tensor2 Mlp::forward(const Tensor2& x, bool training, Rng* rng, Cache* cache) const {
  if (x.cols() != input_dim_) throw ConfigError("MLP expects " + std::to_string(input_dim_) + " input features");
  if (training && dropout_rate_ > 0.0 && rng == nullptr) throw std::invalid_argument("dropout needs an rng");
  Cache local;
  Cache& c = cache != nullptr ? *cache : local;
  c.inputs.clear();
  c.pre_activations.clear();
  c.masks.assign(layers_.size(), {});
  Rng unused(0);
  Tensor2 h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& [w, b] = layers_[l];
    c.inputs.push_back(h);
    Tensor2 z = affine_forward(h, params_[w], params_[b]);
    if (l + 1 == layers_.size()) return z;
    c.pre_activations.push_back(z);
    h = dropout_forward(relu_forward(z), dropout_rate_, rng != nullptr ? *rng : unused, training, c.masks[l]);
  }
  return h;
}

void Mlp::backward(const Cache& cache, const Tensor2& dlogits) {
  Tensor2 d = dlogits;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    auto& [w, b] = layers_[l];
    d = affine_backward(cache.inputs[l], d, params_[w], params_[b]);
    if (l == 0) break;
    d = relu_backward(cache.pre_activations[l - 1], dropout_backward(cache.masks[l - 1], d));
  }
}

std::pair<Mlp, TrainHistory> train_mlp(const Tensor2& x, std::span<const std::size_t> labels,
                                       std::size_t num_classes, std::span<const std::size_t> train_idx,
                                       std::span<const std::size_t> val_idx, const MlpConfig& config,
                                       std::uint64_t seed) {
  const auto start_time = std::chrono::steady_clock::now();
  if (labels.size() != x.rows()) throw ConfigError("feature rows and labels differ in count");
  require_two_classes(labels, train_idx);
  Mlp model(x.cols(), num_classes, config, seed);
  TrainHistory history;

  Rng shuffle_rng(derive_seed(seed, "shuffle"));
  Rng dropout_rng(derive_seed(seed, "dropout"));
  const AdamOptions adam{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay};
  const Tensor2 x_val = gather_rows(x, val_idx);
  const auto val_truth = gather_labels(labels, val_idx);
  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
  std::vector<Tensor2> best;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_no = 0;
    for (std::size_t s = 0; s < order.size(); s += config.batch_size, ++batch_no) {
      const auto chunk =
          std::span<const std::size_t>(order).subspan(s, std::min(config.batch_size, order.size() - s));
      const auto targets = gather_labels(labels, chunk);
      Mlp::Cache cache;
      const Tensor2 logits = model.forward(gather_rows(x, chunk), true, &dropout_rng, &cache);
      LossAndGrad lg;
      try {
        lg = softmax_cross_entropy(logits, targets);
      } catch (const NumericalError& e) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_no) + ": " + e.what());
      }
      model.backward(cache, lg.dlogits);
      adam_step(model.params(), adam);
      loss_sum += lg.loss * static_cast<double>(chunk.size());
      const auto pred = argmax_rows(logits);
      for (std::size_t r = 0; r < pred.size(); ++r) correct += pred[r] == targets[r] ? 1 : 0;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (!val_idx.empty()) {
      const double acc = accuracy(val_truth, argmax_rows(model.forward(x_val, false, nullptr, nullptr)));
      rec.val_accuracy = acc;
      if (!history.best_val_accuracy || acc > *history.best_val_accuracy) {
        history.best_val_accuracy = acc;
        history.best_epoch = epoch;
        best = model.params().snapshot();
      }
    }
    history.epochs.push_back(rec);
  }
  if (best.empty()) {
    history.best_epoch = config.epochs;
  } else {
    model.params().restore(best);
  }
  history.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return {std::move(model), std::move(history)};
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticRegression::LogisticRegression(std::size_t input_dim, std::size_t num_classes)
    : input_dim_(input_dim), num_classes_(num_classes) {
  if (input_dim < 1 || num_classes < 2) throw ConfigError("logistic regression needs features and 2+ classes");
  weight_ = params_.add("logistic.weight", Tensor2(input_dim, num_classes, 0.0));
  bias_ = params_.add("logistic.bias", Tensor2(1, num_classes, 0.0));
}

Tensor2 LogisticRegression::logits(const SparseRows& x) const {
  const Tensor2& w = params_[weight_].value;
  const Tensor2& b = params_[bias_].value;
  Tensor2 out(x.size(), num_classes_, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto row = out.row(i);
    std::copy(b.row(0).begin(), b.row(0).end(), row.begin());
    for (const auto& [col, v] : x.rows[i]) {
      if (col >= input_dim_) continue;
      const auto wr = w.row(col);
      for (std::size_t k = 0; k < num_classes_; ++k) row[k] += v * wr[k];
    }
  }
  return out;
}

std::pair<LogisticRegression, TrainHistory> train_logistic(const SparseRows& x, std::span<const std::size_t> labels,
                                                           std::size_t num_classes,
                                                           std::span<const std::size_t> train_idx,
                                                           std::span<const std::size_t> val_idx,
                                                           const LogisticConfig& config) {
  const auto start_time = std::chrono::steady_clock::now();
  if (labels.size() != x.size()) throw ConfigError("feature rows and labels differ in count");
  if (train_idx.empty()) throw ConfigError("training split is empty");
  const SparseRows train = gather_sparse(x, train_idx);
  const bool any_nonzero = std::any_of(train.rows.begin(), train.rows.end(), [](const auto& row) {
    return std::any_of(row.begin(), row.end(), [](const auto& e) { return e.second != 0.0; });
  });
  if (!any_nonzero) throw DataError("training feature matrix is all zero");

  LogisticRegression model(x.cols, num_classes);
  const auto targets = gather_labels(labels, train_idx);
  const SparseRows val = gather_sparse(x, val_idx);
  const auto val_truth = gather_labels(labels, val_idx);
  const AdamOptions adam{config.learning_rate, 0.9, 0.999, 1e-8, 0.0};
  Param& w = model.params()[0];
  Param& b = model.params()[1];
  TrainHistory history;
  std::optional<double> previous;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const Tensor2 logits = model.logits(train);
    LossAndGrad lg;
    try {
      lg = softmax_cross_entropy(logits, targets);
    } catch (const NumericalError& e) {
      throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    double penalty = 0.0;
    for (double v : w.value.values()) penalty += v * v;
    const double loss = lg.loss + 0.5 * config.l2 * penalty;

    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto d = lg.dlogits.row(i);
      for (const auto& [col, v] : train.rows[i]) {
        auto g = w.grad.row(col);
        for (std::size_t k = 0; k < num_classes; ++k) g[k] += v * d[k];
      }
      auto gb = b.grad.row(0);
      for (std::size_t k = 0; k < num_classes; ++k) gb[k] += d[k];
    }
    auto wg = w.grad.values();
    const auto wv = w.value.values();
    for (std::size_t k = 0; k < wg.size(); ++k) wg[k] += config.l2 * wv[k];

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss;
    rec.train_accuracy = accuracy(targets, argmax_rows(logits));
    adam_step(model.params(), adam);
    if (!val_idx.empty()) rec.val_accuracy = accuracy(val_truth, argmax_rows(model.logits(val)));
    history.epochs.push_back(rec);
    if (previous && std::abs(*previous - loss) < config.tolerance) break;
    previous = loss;
  }
  history.best_epoch = history.epochs.size();
  if (!history.epochs.empty()) history.best_val_accuracy = history.epochs.back().val_accuracy;
  history.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return {std::move(model), std::move(history)};
}

// ---------------------------------------------------------------------------
// Featurizers

Tensor2 BaselineClassifier::histogram_features(std::span<const Graph> graphs) const {
  const std::size_t dim = kLdpChannels * config_.mlp.bins;
  Tensor2 out(graphs.size(), dim, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto h = ldp_graph_histogram(graphs[i], config_.mlp.bins, ranges_);
    std::copy(h.begin(), h.end(), out.row(i).begin());
  }
  return out;
}

namespace {

std::vector<std::pair<std::uint32_t, double>> wl_row(const WlFeatureVector& f, std::size_t nodes) {
  std::vector<std::pair<std::uint32_t, double>> row;
  row.reserve(f.counts.size());
  const double scale = nodes == 0 ? 0.0 : 1.0 / static_cast<double>(nodes);
  for (const auto& [label, count] : f.counts) row.emplace_back(label, static_cast<double>(count) * scale);
  return row;
}

}  // namespace

SparseRows BaselineClassifier::wl_features(std::span<const Graph> graphs) const {
  SparseRows out;
  out.cols = wl_table_.size();
  out.rows.resize(graphs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    out.rows[i] = wl_row(wl_refine(graphs[i], config_.wl_iterations, wl_table_), graphs[i].num_nodes());
  }
  return out;
}

SparseRows BaselineClassifier::feather_features(std::span<const Graph> graphs) const {
  const auto options = default_feather_options(config_.feather_order);
  const std::size_t dim = feather_dimension(kLdpChannels, options);
  Tensor2 dense(graphs.size(), dim, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto e = feather_embed(graphs[i], feather_node_values(graphs[i]), options);
    auto row = dense.row(i);
    for (std::size_t k = 0; k < dim; ++k) {
      const double centered = e[k] - feather_mean_[k];
      row[k] = feather_std_[k] > 0.0 ? centered / feather_std_[k] : centered;
    }
  }
  return SparseRows::from_dense(dense);
}

BaselineClassifier BaselineClassifier::fit(const BaselineConfig& config, const LabeledGraphSet& set,
                                           const DatasetSplit& split, TrainHistory* history) {
  config.validate();
  set.validate();
  if (split.train_idx.empty()) throw ConfigError("training split is empty");
  BaselineClassifier c;
  c.config_ = config;
  c.num_classes_ = set.num_classes();
  const LabeledGraphSet train = set.subset(split.train_idx);
  TrainHistory h;

  switch (config.kind) {
    case BaselineKind::mlp: {
      require_two_classes(set.labels, split.train_idx);
      c.ranges_ = fit_histogram_ranges(train.graphs);
      const Tensor2 x = c.histogram_features(set.graphs);
      auto [model, hist] =
          train_mlp(x, set.labels, c.num_classes_, split.train_idx, split.val_idx, config.mlp, config.seed);
      c.mlp_.emplace(std::move(model));
      h = std::move(hist);
      break;
    }
    case BaselineKind::wl: {
      // Training graphs are interned sequentially in index order; the table
      // is then frozen so other graphs only look labels up.
      for (const auto& g : train.graphs) wl_refine(g, config.wl_iterations, c.wl_table_);
      c.wl_table_.freeze();
      const SparseRows x = c.wl_features(set.graphs);
      auto [model, hist] =
          train_logistic(x, set.labels, c.num_classes_, split.train_idx, split.val_idx, config.logistic);
      c.logistic_.emplace(std::move(model));
      h = std::move(hist);
      break;
    }
    case BaselineKind::feather: {
      const auto options = default_feather_options(config.feather_order);
      const std::size_t dim = feather_dimension(kLdpChannels, options);
      std::vector<std::vector<double>> emb(train.size());
#pragma omp parallel for schedule(dynamic)
      for (std::size_t i = 0; i < train.size(); ++i) {
        emb[i] = feather_embed(train.graphs[i], feather_node_values(train.graphs[i]), options);
      }
      c.feather_mean_.assign(dim, 0.0);
      c.feather_std_.assign(dim, 0.0);
      for (const auto& e : emb) {
        for (std::size_t k = 0; k < dim; ++k) c.feather_mean_[k] += e[k];
      }
      for (double& m : c.feather_mean_) m /= static_cast<double>(emb.size());
      for (const auto& e : emb) {
        for (std::size_t k = 0; k < dim; ++k) {
          const double d = e[k] - c.feather_mean_[k];
          c.feather_std_[k] += d * d;
        }
      }
      for (double& s : c.feather_std_) s = std::sqrt(s / static_cast<double>(emb.size()));
      const SparseRows x = c.feather_features(set.graphs);
      auto [model, hist] =
          train_logistic(x, set.labels, c.num_classes_, split.train_idx, split.val_idx, config.logistic);
      c.logistic_.emplace(std::move(model));
      h = std::move(hist);
      break;
    }
  }
  if (history != nullptr) *history = std::move(h);
  return c;
}

Tensor2 BaselineClassifier::logits(std::span<const Graph> graphs) const {
  switch (config_.kind) {
    case BaselineKind::mlp: return mlp_->forward(histogram_features(graphs), false, nullptr, nullptr);
    case BaselineKind::wl: return logistic_->logits(wl_features(graphs));
    case BaselineKind::feather: return logistic_->logits(feather_features(graphs));
  }
  throw std::logic_error("unknown baseline kind");
}

std::vector<std::size_t> BaselineClassifier::predict(std::span<const Graph> graphs) const {
  if (graphs.empty()) return {};
  return argmax_rows(logits(graphs));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

Tensor2 row_tensor(const std::vector<double>& v) { return Tensor2(1, v.size(), v); }

// Flattened as iteration, length, signature... per entry.
Tensor2 encode_wl_table(const WlLabelTable& table) {
  std::vector<double> flat;
  for (const auto& e : table.entries()) {
    flat.push_back(e.iteration);
    flat.push_back(static_cast<double>(e.signature.size()));
    for (auto s : e.signature) flat.push_back(s);
  }
  if (flat.empty()) flat.push_back(-1.0);
  return row_tensor(flat);
}

WlLabelTable decode_wl_table(const Tensor2& t) {
  const auto v = t.values();
  std::vector<WlLabelTable::Entry> entries;
  if (v.size() == 1 && v[0] == -1.0) return WlLabelTable::from_entries(entries, true);
  auto as_u32 = [](double d) {
    if (!(d >= 0.0 && d <= 4294967295.0) || d != std::floor(d)) throw DataError("corrupt WL label table");
    return static_cast<std::uint32_t>(d);
  };
  std::size_t k = 0;
  while (k < v.size()) {
    if (k + 2 > v.size()) throw DataError("corrupt WL label table");
    WlLabelTable::Entry e;
    e.iteration = as_u32(v[k]);
    const std::size_t len = as_u32(v[k + 1]);
    k += 2;
    if (k + len > v.size()) throw DataError("corrupt WL label table");
    for (std::size_t i = 0; i < len; ++i) e.signature.push_back(as_u32(v[k + i]));
    k += len;
    entries.push_back(std::move(e));
  }
  return WlLabelTable::from_entries(entries, true);
}

void load_params(ParamStore& store, const Checkpoint& ckpt) {
  for (auto& p : store.all()) {
    const Tensor2* found = nullptr;
    for (const auto& [name, t] : ckpt.tensors) {
      if (name == p.name) found = &t;
    }
    if (found == nullptr) throw DataError("checkpoint is missing tensor '" + p.name + "'");
    if (!found->same_shape(p.value)) throw DataError("checkpoint tensor '" + p.name + "' has the wrong shape");
    if (!found->all_finite()) throw DataError("checkpoint tensor '" + p.name + "' has non-finite values");
    p.value = *found;
  }
}

}  // namespace

Checkpoint BaselineClassifier::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.descriptor = {{"format", "fcgnn.baseline"}, {"config", to_json(config_)}, {"num_classes", num_classes_}};
  switch (config_.kind) {
    case BaselineKind::mlp: {
      ckpt.tensors.emplace_back("histogram.lo", row_tensor({ranges_.lo.begin(), ranges_.lo.end()}));
      ckpt.tensors.emplace_back("histogram.hi", row_tensor({ranges_.hi.begin(), ranges_.hi.end()}));
      ckpt.descriptor["input_dim"] = mlp_->input_dim();
      for (const auto& p : mlp_->params().all()) ckpt.tensors.emplace_back(p.name, p.value);
      break;
    }
    case BaselineKind::wl:
    case BaselineKind::feather: {
      if (config_.kind == BaselineKind::wl) {
        ckpt.tensors.emplace_back("wl.table", encode_wl_table(wl_table_));
      } else {
        ckpt.tensors.emplace_back("feather.mean", row_tensor(feather_mean_));
        ckpt.tensors.emplace_back("feather.std", row_tensor(feather_std_));
      }
      ckpt.descriptor["input_dim"] = logistic_->input_dim();
      for (const auto& p : logistic_->params().all()) ckpt.tensors.emplace_back(p.name, p.value);
      break;
    }
  }
  return ckpt;
}

BaselineClassifier BaselineClassifier::from_checkpoint(const Checkpoint& ckpt) {
  const auto& d = ckpt.descriptor;
  if (!d.is_object() || d.value("format", "") != "fcgnn.baseline") {
    throw DataError("checkpoint does not hold a baseline model");
  }
  BaselineClassifier c;
  std::size_t input_dim = 0;
  try {
    c.config_ = baseline_config_from_json(d.at("config"));
    c.num_classes_ = d.at("num_classes").get<std::size_t>();
    input_dim = d.at("input_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed baseline checkpoint descriptor: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed baseline checkpoint descriptor: ") + e.what());
  }
  try {
    switch (c.config_.kind) {
      case BaselineKind::mlp: {
        const auto& lo = ckpt.tensor("histogram.lo");
        const auto& hi = ckpt.tensor("histogram.hi");
        if (lo.size() != kLdpChannels || hi.size() != kLdpChannels) throw DataError("corrupt histogram ranges");
        std::copy(lo.values().begin(), lo.values().end(), c.ranges_.lo.begin());
        std::copy(hi.values().begin(), hi.values().end(), c.ranges_.hi.begin());
        Mlp model(input_dim, c.num_classes_, c.config_.mlp, c.config_.seed);
        load_params(model.params(), ckpt);
        c.mlp_.emplace(std::move(model));
        break;
      }
      case BaselineKind::wl:
      case BaselineKind::feather: {
        if (c.config_.kind == BaselineKind::wl) {
          c.wl_table_ = decode_wl_table(ckpt.tensor("wl.table"));
          if (c.wl_table_.size() != input_dim) throw DataError("WL table size does not match the classifier");
        } else {
          const auto& mean = ckpt.tensor("feather.mean");
          const auto& sd = ckpt.tensor("feather.std");
          if (mean.size() != input_dim || sd.size() != input_dim) throw DataError("corrupt FEATHER statistics");
          c.feather_mean_.assign(mean.values().begin(), mean.values().end());
          c.feather_std_.assign(sd.values().begin(), sd.values().end());
        }
        LogisticRegression model(input_dim, c.num_classes_);
        load_params(model.params(), ckpt);
        c.logistic_.emplace(std::move(model));
        break;
      }
    }
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed baseline checkpoint: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw DataError(std::string("malformed baseline checkpoint: ") + e.what());
  }
  return c;
}

}  // namespace fcgnn
