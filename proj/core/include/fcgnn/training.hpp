#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fcgnn/dataset.hpp"
#include "fcgnn/features.hpp"
#include "fcgnn/gnn.hpp"

namespace fcgnn {

using ConfusionMatrix = std::vector<std::vector<std::uint64_t>>;

struct MetricsReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_accuracy;  // 0 for classes absent from the subset
  ConfusionMatrix confusion;               // rows = true class, cols = predicted
  double runtime_seconds = 0.0;
  std::size_t epochs_run = 0;
  std::vector<std::string> warnings;
};

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                 std::size_t num_classes);

// Unweighted mean of per-class F1. A class with no true and no predicted
// samples scores 0 and, when `warnings` is given, adds a message there.
double macro_f1(const ConfusionMatrix& confusion, std::vector<std::string>* warnings = nullptr,
                std::span<const std::string> class_names = {});

// Throws ConfigError for an empty subset or mismatched lengths.
MetricsReport evaluate_predictions(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                   std::size_t num_classes, std::span<const std::string> class_names = {});

nlohmann::json to_json(const MetricsReport& report, std::span<const std::string> class_names);
void write_confusion_csv(std::ostream& out, const MetricsReport& report, std::span<const std::string> class_names);

// Graphs paired with per-node input features. Views only; the owner must
// outlive the view.
struct GraphData {
  std::span<const Graph> graphs;
  std::span<const Tensor2> features;
  std::span<const std::size_t> labels;
  std::size_t num_classes = 0;

  void validate() const;
};

// Standardized log-LDP node features for every graph.
std::vector<Tensor2> ldp_feature_set(std::span<const Graph> graphs, const LdpStats& stats);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_accuracy;  // absent when the validation split is empty
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 = initial parameters kept
  std::optional<double> best_val_accuracy;
  double train_seconds = 0.0;
};

void write_history_csv(std::ostream& out, const TrainHistory& history);

// Mini-batch Adam for config().epochs epochs. After every epoch the model is
// scored on the validation graphs; the parameters (and batch-norm running
// statistics) of the best-scoring epoch are restored at the end, ties going to
// the earliest epoch. Without validation graphs the final epoch is kept.
// Throws NumericalError with epoch and batch context on a non-finite loss.
TrainHistory train_gnn(GnnModel& model, const GraphData& data, std::span<const std::size_t> train_idx,
                       std::span<const std::size_t> val_idx);

// Eval-mode forward in chunks of `batch_size` graphs.
GnnModel::Output gnn_outputs(const GnnModel& model, const GraphData& data, std::span<const std::size_t> indices,
                             std::size_t batch_size = 64);
std::vector<std::size_t> predict_gnn(const GnnModel& model, const GraphData& data,
                                     std::span<const std::size_t> indices, std::size_t batch_size = 64);

// Throws ConfigError for an empty subset.
MetricsReport evaluate_gnn(const GnnModel& model, const GraphData& data, std::span<const std::size_t> indices,
                           std::span<const std::string> class_names = {});

double accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> predicted);

}  // namespace fcgnn
