#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fcgnn/checkpoint.hpp"
#include "fcgnn/dataset.hpp"
#include "fcgnn/features.hpp"
#include "fcgnn/param.hpp"
#include "fcgnn/training.hpp"

namespace fcgnn {

enum class BaselineKind { mlp, wl, feather };

std::string_view to_string(BaselineKind kind);
// Throws ConfigError for unknown names.
BaselineKind parse_baseline_kind(std::string_view name);
bool is_baseline_name(std::string_view name);

struct MlpConfig {
  std::size_t layers = 5;  // affine maps, the last one producing logits
  std::size_t hidden = 64;
  double learning_rate = 0.001;
  double weight_decay = 0.0;
  double dropout_rate = 0.5;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t bins = kDefaultHistogramBins;
};

struct LogisticConfig {
  double learning_rate = 0.01;
  double l2 = 1e-4;
  std::size_t max_epochs = 500;
  double tolerance = 1e-6;  // stop once |loss change| falls below this
};

struct BaselineConfig {
  BaselineKind kind = BaselineKind::mlp;
  MlpConfig mlp;
  LogisticConfig logistic;
  std::uint32_t wl_iterations = 2;
  std::size_t feather_order = 2;
  std::uint64_t seed = 1;

  // Throws ConfigError when a field is out of range.
  void validate() const;
};

nlohmann::json to_json(const BaselineConfig& config);
BaselineConfig baseline_config_from_json(const nlohmann::json& j);

// Row-sparse feature matrix with sorted column indices per row.
struct SparseRows {
  std::size_t cols = 0;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;

  std::size_t size() const { return rows.size(); }
  static SparseRows from_dense(const Tensor2& dense);
};

// Feedforward classifier: (layers - 1) x [affine, ReLU, dropout], affine.
class Mlp {
 public:
  Mlp(std::size_t input_dim, std::size_t num_classes, const MlpConfig& config, std::uint64_t seed);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct Cache {
    std::vector<Tensor2> inputs;  // input to each affine map
    std::vector<Tensor2> pre_activations;
    std::vector<DropoutMask> masks;
  };

  Tensor2 forward(const Tensor2& x, bool training, Rng* rng, Cache* cache) const;
  void backward(const Cache& cache, const Tensor2& dlogits);

 private:
  std::size_t input_dim_;
  std::size_t num_classes_;
  double dropout_rate_;
  ParamStore params_;
  std::vector<std::pair<ParamId, ParamId>> layers_;
};

// Mini-batch Adam with best-validation retention (ties to the earliest
// epoch). Throws DataError when the training rows hold a single class.
std::pair<Mlp, TrainHistory> train_mlp(const Tensor2& x, std::span<const std::size_t> labels,
                                       std::size_t num_classes, std::span<const std::size_t> train_idx,
                                       std::span<const std::size_t> val_idx, const MlpConfig& config,
                                       std::uint64_t seed);

// Multinomial logistic regression on sparse rows.
class LogisticRegression {
 public:
  LogisticRegression(std::size_t input_dim, std::size_t num_classes);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Tensor2 logits(const SparseRows& x) const;

 private:
  std::size_t input_dim_;
  std::size_t num_classes_;
  ParamStore params_;
  ParamId weight_;
  ParamId bias_;
};

// Full-batch Adam on mean cross-entropy plus l2/2 * |W|^2, from zero weights,
// until the loss change drops below the tolerance or max_epochs is reached.
// Throws DataError when every training feature is zero.
std::pair<LogisticRegression, TrainHistory> train_logistic(const SparseRows& x, std::span<const std::size_t> labels,
                                                           std::size_t num_classes,
                                                           std::span<const std::size_t> train_idx,
                                                           std::span<const std::size_t> val_idx,
                                                           const LogisticConfig& config);

// Featurizer fitted on training graphs plus its classifier.
class BaselineClassifier {
 public:
  static BaselineClassifier fit(const BaselineConfig& config, const LabeledGraphSet& set, const DatasetSplit& split,
                                TrainHistory* history = nullptr);

  const BaselineConfig& config() const { return config_; }
  std::size_t num_classes() const { return num_classes_; }

  Tensor2 logits(std::span<const Graph> graphs) const;
  std::vector<std::size_t> predict(std::span<const Graph> graphs) const;

  Checkpoint to_checkpoint() const;
  // Throws DataError when the checkpoint does not describe a baseline.
  static BaselineClassifier from_checkpoint(const Checkpoint& ckpt);

 private:
  BaselineClassifier() = default;

  Tensor2 histogram_features(std::span<const Graph> graphs) const;
  SparseRows wl_features(std::span<const Graph> graphs) const;
  SparseRows feather_features(std::span<const Graph> graphs) const;

  BaselineConfig config_;
  std::size_t num_classes_ = 0;
  HistogramRanges ranges_;
  // Frozen after fitting; interning into a frozen table never mutates it.
  mutable WlLabelTable wl_table_;
  std::vector<double> feather_mean_;
  std::vector<double> feather_std_;
  std::optional<Mlp> mlp_;
  std::optional<LogisticRegression> logistic_;
};

}  // namespace fcgnn
