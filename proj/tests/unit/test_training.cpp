#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fcgnn/error.hpp"
#include "fcgnn/training.hpp"
#include "test_support.hpp"

using namespace fcgnn;
using fcgnn::testing::cycle_graph;
using fcgnn::testing::path_graph;
using fcgnn::testing::star_graph;

namespace {

// Stars versus cycles, ten of each with varying size.
struct ToySet {
  std::vector<Graph> graphs;
  std::vector<std::size_t> labels;
  std::vector<Tensor2> features;
  std::vector<std::size_t> all;

  ToySet() {
    for (std::size_t i = 0; i < 10; ++i) {
      graphs.push_back(star_graph(4 + i));
      labels.push_back(0);
      graphs.push_back(cycle_graph(5 + i));
      labels.push_back(1);
    }
    features = ldp_feature_set(graphs, fit_ldp_stats(graphs));
    for (std::size_t i = 0; i < graphs.size(); ++i) all.push_back(i);
  }

  GraphData data() const { return {graphs, features, labels, 2}; }
};

ModelConfig toy_config(Architecture arch, std::size_t epochs) {
  ModelConfig c;
  c.architecture = arch;
  c.num_layers = 2;
  c.hidden_dim = 16;
  c.learning_rate = 0.01;
  c.dropout_rate = 0.0;
  c.epochs = epochs;
  c.batch_size = 4;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(MacroF1, Examples) {
  EXPECT_DOUBLE_EQ(macro_f1({{3, 0, 0}, {0, 4, 0}, {0, 0, 1}}), 1.0);
  EXPECT_NEAR(macro_f1({{5, 0}, {5, 0}}), 1.0 / 3.0, 1e-15);
  std::vector<std::string> warnings;
  EXPECT_EQ(macro_f1({{0, 0}, {0, 0}}, &warnings), 0.0);
  EXPECT_FALSE(warnings.empty());
}

TEST(MacroF1, AbsentClassScoresZeroWithWarning) {
  std::vector<std::string> warnings;
  const std::vector<std::string> names = {"a", "b", "c"};
  const double f1 = macro_f1({{2, 0, 0}, {0, 3, 0}, {0, 0, 0}}, &warnings, names);
  EXPECT_NEAR(f1, 2.0 / 3.0, 1e-15);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("c"), std::string::npos);
}

TEST(Evaluate, ConstantPredictorOnBalancedFiveClasses) {
  std::vector<std::size_t> truth;
  for (std::size_t c = 0; c < 5; ++c) truth.insert(truth.end(), 20, c);
  const std::vector<std::size_t> predicted(truth.size(), 0);
  const auto r = evaluate_predictions(truth, predicted, 5);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.2);
  EXPECT_NEAR(r.macro_f1, 0.06666666666666667, 1e-15);
  EXPECT_EQ(r.per_class_accuracy, (std::vector<double>{1, 0, 0, 0, 0}));
}

TEST(Evaluate, PerfectAndSwappedPredictions) {
  const std::vector<std::size_t> truth = {0, 1, 1, 0, 1};
  const auto perfect = evaluate_predictions(truth, truth, 2);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.macro_f1, 1.0);
  EXPECT_EQ(perfect.confusion, (ConfusionMatrix{{2, 0}, {0, 3}}));
  const std::vector<std::size_t> swapped = {1, 0, 0, 1, 0};
  const auto r = evaluate_predictions(truth, swapped, 2);
  EXPECT_EQ(r.confusion[0][0], 0u);
  EXPECT_EQ(r.confusion[1][1], 0u);
  EXPECT_EQ(r.accuracy, 0.0);
  EXPECT_THROW(evaluate_predictions({}, {}, 2), ConfigError);
  const std::vector<std::size_t> shorter = {0};
  EXPECT_THROW(evaluate_predictions(truth, shorter, 2), ConfigError);
}

TEST(Evaluate, ReportInvariantsOnRandomPredictions) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<std::size_t> truth(n);
    std::vector<std::size_t> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng.below(4);
      pred[i] = rng.below(4);
    }
    const auto r = evaluate_predictions(truth, pred, 4);
    std::uint64_t total = 0;
    std::uint64_t trace = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      std::uint64_t row = 0;
      for (std::size_t j = 0; j < 4; ++j) row += r.confusion[i][j];
      EXPECT_EQ(row, static_cast<std::uint64_t>(std::count(truth.begin(), truth.end(), i)));
      total += row;
      trace += r.confusion[i][i];
    }
    EXPECT_EQ(total, n);
    EXPECT_EQ(r.accuracy, static_cast<double>(trace) / static_cast<double>(n));
    EXPECT_GE(r.macro_f1, 0.0);
    EXPECT_LE(r.macro_f1, 1.0);
  }
}

TEST(Evaluate, JsonAndCsvOutputs) {
  const std::vector<std::size_t> truth = {0, 1, 1};
  const std::vector<std::size_t> pred = {0, 1, 0};
  const std::vector<std::string> names = {"benign", "trojan"};
  auto r = evaluate_predictions(truth, pred, 2, names);
  r.epochs_run = 7;
  const auto j = to_json(r, names);
  EXPECT_DOUBLE_EQ(j.at("accuracy").get<double>(), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(j.at("per_class_accuracy").at("trojan").get<double>(), 0.5);
  EXPECT_EQ(j.at("confusion"), nlohmann::json::parse("[[1,0],[1,1]]"));
  EXPECT_EQ(j.at("epochs_run"), 7);
  for (const char* key : {"macro_f1", "classes", "runtime_seconds", "warnings"}) EXPECT_TRUE(j.contains(key)) << key;
  std::ostringstream csv;
  write_confusion_csv(csv, r, names);
  EXPECT_EQ(csv.str(), "true\\predicted,benign,trojan\nbenign,1,0\ntrojan,1,1\n");
}

TEST(TrainGnn, SeparableToySetReachesPerfectTrainAccuracy) {
  const ToySet toy;
  GnnModel model(toy_config(Architecture::gcn, 50), kLdpChannels, 2);
  const auto history = train_gnn(model, toy.data(), toy.all, {});
  EXPECT_EQ(history.epochs.size(), 50u);
  const auto report = evaluate_gnn(model, toy.data(), toy.all);
  EXPECT_EQ(report.accuracy, 1.0);
}

TEST(TrainGnn, ZeroEpochsKeepsInitialModel) {
  const ToySet toy;
  GnnModel model(toy_config(Architecture::gin, 0), kLdpChannels, 2);
  const auto before = model.params().snapshot();
  const auto history = train_gnn(model, toy.data(), toy.all, toy.all);
  EXPECT_TRUE(history.epochs.empty());
  EXPECT_EQ(history.best_epoch, 0u);
  EXPECT_EQ(model.params().snapshot(), before);
}

TEST(TrainGnn, SameSeedSameHistoryAndParameters) {
  const ToySet toy;
  const std::vector<std::size_t> train = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
  const std::vector<std::size_t> val = {14, 15, 16, 17, 18, 19};
  ModelConfig config = toy_config(Architecture::jk_sage, 6);
  config.dropout_rate = 0.5;
  GnnModel a(config, kLdpChannels, 2);
  GnnModel b(config, kLdpChannels, 2);
  const auto ha = train_gnn(a, toy.data(), train, val);
  const auto hb = train_gnn(b, toy.data(), train, val);
  ASSERT_EQ(ha.epochs.size(), hb.epochs.size());
  for (std::size_t e = 0; e < ha.epochs.size(); ++e) {
    EXPECT_EQ(ha.epochs[e].train_loss, hb.epochs[e].train_loss);
    EXPECT_EQ(ha.epochs[e].val_accuracy, hb.epochs[e].val_accuracy);
  }
  EXPECT_EQ(a.params().snapshot(), b.params().snapshot());
  EXPECT_EQ(a.to_checkpoint().tensors, b.to_checkpoint().tensors);
}

TEST(TrainGnn, RetainedParametersScoreTheBestRecordedValidationAccuracy) {
  const ToySet toy;
  const std::vector<std::size_t> train = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  const std::vector<std::size_t> val = {12, 13, 14, 15, 16, 17, 18, 19};
  ModelConfig config = toy_config(Architecture::sage, 8);
  config.learning_rate = 0.003;
  GnnModel model(config, kLdpChannels, 2);
  const auto history = train_gnn(model, toy.data(), train, val);
  ASSERT_TRUE(history.best_val_accuracy.has_value());
  double best = 0.0;
  std::size_t first_best = 0;
  for (const auto& e : history.epochs) {
    if (*e.val_accuracy > best) {
      best = *e.val_accuracy;
      first_best = e.epoch;
    }
  }
  EXPECT_EQ(*history.best_val_accuracy, best);
  EXPECT_EQ(history.best_epoch, first_best);
  EXPECT_GE(best, *history.epochs.back().val_accuracy);
  EXPECT_EQ(evaluate_gnn(model, toy.data(), val).accuracy, best);
}

TEST(TrainGnn, NonFiniteLossReportsEpochAndBatch) {
  ToySet toy;
  toy.features[3](0, 0) = std::nan("");
  GnnModel model(toy_config(Architecture::gcn, 2), kLdpChannels, 2);
  try {
    train_gnn(model, toy.data(), toy.all, {});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(TrainGnn, EvaluationLeavesModelUntouched) {
  const ToySet toy;
  GnnModel model(toy_config(Architecture::jk_gin, 2), kLdpChannels, 2);
  train_gnn(model, toy.data(), toy.all, {});
  const auto ckpt = model.to_checkpoint();
  const auto first = evaluate_gnn(model, toy.data(), toy.all);
  const auto second = evaluate_gnn(model, toy.data(), toy.all);
  EXPECT_EQ(first.confusion, second.confusion);
  EXPECT_EQ(model.to_checkpoint().tensors, ckpt.tensors);
  EXPECT_THROW(evaluate_gnn(model, toy.data(), {}), ConfigError);
}

TEST(TrainGnn, BatchSizeDoesNotChangePredictions) {
  const ToySet toy;
  GnnModel model(toy_config(Architecture::gin, 1), kLdpChannels, 2);
  const auto a = gnn_outputs(model, toy.data(), toy.all, 1);
  const auto b = gnn_outputs(model, toy.data(), toy.all, 64);
  EXPECT_LT(max_abs_diff(a.logits, b.logits), 1e-10);
}

TEST(History, CsvLayout) {
  TrainHistory h;
  h.epochs.push_back({1, 0.5, 0.75, 0.25});
  h.epochs.push_back({2, 0.25, 1.0, std::nullopt});
  std::ostringstream out;
  write_history_csv(out, h);
  EXPECT_EQ(out.str(), "epoch,train_loss,train_accuracy,val_accuracy\n1,0.5,0.75,0.25\n2,0.25,1,\n");
}
