#include "fcgnn/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fcgnn/error.hpp"

namespace fcgnn {

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                 std::size_t num_classes) {
  if (truth.size() != predicted.size()) throw ConfigError("truth and prediction lengths differ");
  ConfusionMatrix m(num_classes, std::vector<std::uint64_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw std::out_of_range("class index " + std::to_string(std::max(truth[i], predicted[i])) + " out of range");
    }
    ++m[truth[i]][predicted[i]];
  }
  return m;
}

namespace {

std::string class_label(std::span<const std::string> names, std::size_t c) {
  return c < names.size() ? names[c] : "class " + std::to_string(c);
}

}  // namespace

double macro_f1(const ConfusionMatrix& confusion, std::vector<std::string>* warnings,
                std::span<const std::string> class_names) {
  const std::size_t k = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != k) throw ConfigError("confusion matrix must be square");
  }
  if (k == 0) return 0.0;
  std::uint64_t total = 0;
  for (const auto& row : confusion) total = std::accumulate(row.begin(), row.end(), total);
  if (total == 0) {
    if (warnings != nullptr) warnings->push_back("confusion matrix is empty; macro-F1 reported as 0");
    return 0.0;
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t actual = 0;
    std::uint64_t predicted = 0;
    for (std::size_t j = 0; j < k; ++j) {
      actual += confusion[c][j];
      predicted += confusion[j][c];
    }
    const auto tp = static_cast<double>(confusion[c][c]);
    if (actual == 0 && warnings != nullptr) {
      warnings->push_back(class_label(class_names, c) + " is absent from the evaluated subset; its F1 counts as 0");
    }
    if (tp == 0.0) continue;
    // F1 = 2 tp / (actual + predicted).
    sum += 2.0 * tp / static_cast<double>(actual + predicted);
  }
  return sum / static_cast<double>(k);
}

MetricsReport evaluate_predictions(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                   std::size_t num_classes, std::span<const std::string> class_names) {
  if (truth.empty()) throw ConfigError("cannot evaluate an empty subset");
  MetricsReport r;
  r.confusion = confusion_matrix(truth, predicted, num_classes);
  std::uint64_t correct = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    correct += r.confusion[c][c];
    const auto row = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::uint64_t{0});
    r.per_class_accuracy.push_back(row == 0 ? 0.0
                                            : static_cast<double>(r.confusion[c][c]) / static_cast<double>(row));
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  r.macro_f1 = macro_f1(r.confusion, &r.warnings, class_names);
  return r;
}

double accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> predicted) {
  if (truth.size() != predicted.size()) throw ConfigError("truth and prediction lengths differ");
  if (truth.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predicted[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

nlohmann::json to_json(const MetricsReport& r, std::span<const std::string> class_names) {
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < r.per_class_accuracy.size(); ++c) {
    per_class[class_label(class_names, c)] = r.per_class_accuracy[c];
  }
  nlohmann::json names = nlohmann::json::array();
  for (std::size_t c = 0; c < r.confusion.size(); ++c) names.push_back(class_label(class_names, c));
  return {{"accuracy", r.accuracy},
          {"macro_f1", r.macro_f1},
          {"per_class_accuracy", per_class},
          {"classes", names},
          {"confusion", r.confusion},
          {"runtime_seconds", r.runtime_seconds},
          {"epochs_run", r.epochs_run},
          {"warnings", r.warnings}};
}

void write_confusion_csv(std::ostream& out, const MetricsReport& r, std::span<const std::string> class_names) {
  out << "true\\predicted";
  for (std::size_t c = 0; c < r.confusion.size(); ++c) out << ',' << class_label(class_names, c);
  out << '\n';
  for (std::size_t c = 0; c < r.confusion.size(); ++c) {
    out << class_label(class_names, c);
    for (auto v : r.confusion[c]) out << ',' << v;
    out << '\n';
  }
}

void write_history_csv(std::ostream& out, const TrainHistory& h) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "epoch,train_loss,train_accuracy,val_accuracy\n";
  for (const auto& e : h.epochs) {
    buf << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ',';
    if (e.val_accuracy) buf << *e.val_accuracy;
    buf << '\n';
  }
  out << buf.str();
}

// ---------------------------------------------------------------------------

void GraphData::validate() const {
  if (graphs.size() != features.size() || graphs.size() != labels.size()) {
    throw ConfigError("graph, feature and label counts differ");
  }
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (features[i].rows() != graphs[i].num_nodes()) {
      throw ConfigError("feature rows do not match node count for graph " + std::to_string(i));
    }
    if (labels[i] >= num_classes) throw std::out_of_range("label out of range for graph " + std::to_string(i));
  }
}

std::vector<Tensor2> ldp_feature_set(std::span<const Graph> graphs, const LdpStats& stats) {
  std::vector<Tensor2> out(graphs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < graphs.size(); ++i) out[i] = ldp_node_features(graphs[i], stats);
  return out;
}

namespace {

std::pair<BatchedGraph, Tensor2> make_batch(const GraphData& data, std::span<const std::size_t> indices) {
  std::vector<const Graph*> gp;
  std::vector<const Tensor2*> fp;
  gp.reserve(indices.size());
  fp.reserve(indices.size());
  for (std::size_t i : indices) {
    gp.push_back(&data.graphs[i]);
    fp.push_back(&data.features[i]);
  }
  return {batch_graphs(gp), stack_rows(fp)};
}

void check_indices(const GraphData& data, std::span<const std::size_t> indices) {
  for (std::size_t i : indices) {
    if (i >= data.graphs.size()) throw std::out_of_range("graph index " + std::to_string(i) + " out of range");
  }
}

}  // namespace

GnnModel::Output gnn_outputs(const GnnModel& model, const GraphData& data, std::span<const std::size_t> indices,
                             std::size_t batch_size) {
  check_indices(data, indices);
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  GnnModel::Output all;
  all.logits = Tensor2(indices.size(), model.num_classes(), 0.0);
  all.embeddings = Tensor2(indices.size(), model.embedding_dim(), 0.0);
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const auto chunk = indices.subspan(start, std::min(batch_size, indices.size() - start));
    const auto [b, x] = make_batch(data, chunk);
    const auto out = model.predict(b, x);
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      std::copy(out.logits.row(r).begin(), out.logits.row(r).end(), all.logits.row(start + r).begin());
      std::copy(out.embeddings.row(r).begin(), out.embeddings.row(r).end(), all.embeddings.row(start + r).begin());
    }
  }
  return all;
}

std::vector<std::size_t> predict_gnn(const GnnModel& model, const GraphData& data,
                                     std::span<const std::size_t> indices, std::size_t batch_size) {
  return argmax_rows(gnn_outputs(model, data, indices, batch_size).logits);
}

MetricsReport evaluate_gnn(const GnnModel& model, const GraphData& data, std::span<const std::size_t> indices,
                           std::span<const std::string> class_names) {
  if (indices.empty()) throw ConfigError("cannot evaluate an empty subset");
  const auto predicted = predict_gnn(model, data, indices);
  std::vector<std::size_t> truth;
  truth.reserve(indices.size());
  for (std::size_t i : indices) truth.push_back(data.labels[i]);
  return evaluate_predictions(truth, predicted, data.num_classes, class_names);
}

TrainHistory train_gnn(GnnModel& model, const GraphData& data, std::span<const std::size_t> train_idx,
                       std::span<const std::size_t> val_idx) {
  const auto start_time = std::chrono::steady_clock::now();
  data.validate();
  check_indices(data, train_idx);
  check_indices(data, val_idx);
  const ModelConfig& cfg = model.config();
  if (data.num_classes != model.num_classes()) throw ConfigError("dataset and model class counts differ");
  TrainHistory history;
  if (cfg.epochs == 0) return history;
  if (train_idx.empty()) throw ConfigError("training split is empty");

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  const AdamOptions adam{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay};

  std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
  std::vector<Tensor2> best_params;
  std::vector<BatchNormState> best_bn;
  std::vector<std::size_t> val_truth;
  for (std::size_t i : val_idx) val_truth.push_back(data.labels[i]);

  model.params().zero_grad();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_no = 0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size, ++batch_no) {
      const auto chunk = std::span<const std::size_t>(order).subspan(s, std::min(cfg.batch_size, order.size() - s));
      const auto [b, x] = make_batch(data, chunk);
      std::vector<std::size_t> targets;
      targets.reserve(chunk.size());
      for (std::size_t i : chunk) targets.push_back(data.labels[i]);

      std::shared_ptr<GnnModel::Tape> tape;
      const auto out = model.forward(b, x, GnnModel::Mode::train, &dropout_rng, &tape);
      LossAndGrad lg;
      try {
        lg = softmax_cross_entropy(out.logits, targets);
      } catch (const NumericalError& e) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_no) + ": " + e.what());
      }
      model.backward(*tape, lg.dlogits);
      try {
        adam_step(model.params(), adam);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no) + ": " +
                             e.what());
      }
      loss_sum += lg.loss * static_cast<double>(chunk.size());
      const auto pred = argmax_rows(out.logits);
      for (std::size_t r = 0; r < pred.size(); ++r) correct += pred[r] == targets[r] ? 1 : 0;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (!val_idx.empty()) {
      const double acc = accuracy(val_truth, predict_gnn(model, data, val_idx));
      rec.val_accuracy = acc;
      if (!history.best_val_accuracy || acc > *history.best_val_accuracy) {
        history.best_val_accuracy = acc;
        history.best_epoch = epoch;
        best_params = model.params().snapshot();
        best_bn = model.batch_norm_states();
      }
    }
    history.epochs.push_back(rec);
  }
  if (best_params.empty()) {
    history.best_epoch = cfg.epochs;
  } else {
    model.params().restore(best_params);
    model.batch_norm_states() = best_bn;
  }
  history.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return history;
}

}  // namespace fcgnn
