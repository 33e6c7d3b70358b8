#include "cli.hpp"

#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fcgnn/baselines.hpp"
#include "fcgnn/checkpoint.hpp"
#include "fcgnn/dataset.hpp"
#include "fcgnn/error.hpp"
#include "fcgnn/features.hpp"
#include "fcgnn/gnn.hpp"
#include "fcgnn/training.hpp"

namespace fcgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointFile = "checkpoint.fcgnn";
constexpr const char* kToolVersion = "0.1.0";

struct Options {
  std::string command;
  std::optional<std::string> data;
  std::optional<std::size_t> synthetic;
  std::optional<std::string> arch;
  std::optional<std::size_t> layers;
  std::optional<std::size_t> hidden;
  std::optional<double> lr;
  std::optional<double> wd;
  std::optional<double> dropout;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> bins;
  std::optional<std::uint32_t> wl_iterations;
  std::optional<std::size_t> feather_order;
  std::optional<std::string> split;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> config;
  std::optional<std::string> checkpoint;
  std::optional<std::string> subset;
};

// Fills options the command line left unset from a JSON config file whose
// keys are the long flag names without dashes.
class ConfigMerger {
 public:
  ConfigMerger(const json& file, CLI::App& app) : file_(file), app_(app) {}

  template <typename T>
  void merge(const std::string& key, std::optional<T>& target) {
    if (!file_.contains(key)) return;
    const auto* opt = app_.get_option_no_throw("--" + flag_name(key));
    if (opt != nullptr && opt->count() > 0) return;
    try {
      target = file_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config file key '" + key + "': " + e.what());
    }
  }

 private:
  static std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }

  const json& file_;
  CLI::App& app_;
};

void merge_config_file(Options& o, CLI::App& sub) {
  if (!o.config) return;
  std::ifstream in(*o.config);
  if (!in) throw ConfigError("cannot open config file " + *o.config);
  json file;
  try {
    file = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + *o.config + " is not valid JSON: " + e.what());
  }
  if (!file.is_object()) throw ConfigError("config file " + *o.config + " must hold a JSON object");
  static const char* known[] = {"data",  "synthetic", "arch",          "layers",        "hidden",
                                "lr",    "wd",        "dropout",       "epochs",        "batch",
                                "bins",  "split",     "wl_iterations", "feather_order", "seed",
                                "out",   "checkpoint", "subset"};
  for (const auto& [key, value] : file.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError("config file has unknown key '" + key + "'");
    }
  }
  ConfigMerger m(file, sub);
  m.merge("data", o.data);
  m.merge("synthetic", o.synthetic);
  m.merge("arch", o.arch);
  m.merge("layers", o.layers);
  m.merge("hidden", o.hidden);
  m.merge("lr", o.lr);
  m.merge("wd", o.wd);
  m.merge("dropout", o.dropout);
  m.merge("epochs", o.epochs);
  m.merge("batch", o.batch);
  m.merge("bins", o.bins);
  m.merge("wl_iterations", o.wl_iterations);
  m.merge("feather_order", o.feather_order);
  m.merge("seed", o.seed);
  m.merge("out", o.out);
  m.merge("checkpoint", o.checkpoint);
  m.merge("subset", o.subset);
  if (file.contains("split") && sub.get_option("--split")->count() == 0) {
    const auto& s = file["split"];
    if (s.is_string()) {
      o.split = s.get<std::string>();
    } else if (s.is_array() && s.size() == 3 && std::all_of(s.begin(), s.end(), [](const json& v) {
                 return v.is_number();
               })) {
      std::ostringstream text;
      text.precision(17);
      text << s[0].get<double>() << ',' << s[1].get<double>() << ',' << s[2].get<double>();
      o.split = text.str();
    } else {
      throw ConfigError("config file key 'split' must be \"R,R,R\" or an array of three numbers");
    }
  }
}

SplitRatios parse_split(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--split expects three comma-separated numbers, got '" + text + "'");
    }
  }
  if (parts.size() != 3) throw ConfigError("--split expects three comma-separated numbers, got '" + text + "'");
  return {parts[0], parts[1], parts[2]};
}

std::uint64_t seed_of(const Options& o) { return o.seed.value_or(1); }

json split_json(const SplitRatios& r) { return json::array({r.train, r.val, r.test}); }

LabeledGraphSet load_dataset(const Options& o) {
  if (o.data && o.synthetic) throw ConfigError("give either --data or --synthetic, not both");
  if (o.data) return load_malnet_dir(*o.data);
  if (o.synthetic) {
    if (*o.synthetic < 1) throw ConfigError("--synthetic needs at least 1 graph per family");
    return synth_families(*o.synthetic, seed_of(o));
  }
  throw ConfigError("no dataset given; use --data DIR or --synthetic N");
}

json dataset_json(const Options& o, const LabeledGraphSet& set) {
  json j = {{"num_graphs", set.size()}, {"class_names", set.class_names}};
  if (o.data) {
    j["source"] = "malnet";
    j["path"] = *o.data;
  } else {
    j["source"] = "synthetic";
    j["per_class"] = *o.synthetic;
  }
  return j;
}

json sub_seeds(std::uint64_t seed) {
  json j = json::object();
  for (const char* name : {"split", "init", "dropout", "shuffle", "synth"}) j[name] = derive_seed(seed, name);
  return j;
}

json options_json(const Options& o) {
  json j = json::object();
  auto put = [&j](const char* key, const auto& v) {
    if (v) j[key] = *v;
  };
  put("data", o.data);
  put("synthetic", o.synthetic);
  put("arch", o.arch);
  put("layers", o.layers);
  put("hidden", o.hidden);
  put("lr", o.lr);
  put("wd", o.wd);
  put("dropout", o.dropout);
  put("epochs", o.epochs);
  put("batch", o.batch);
  put("bins", o.bins);
  put("wl_iterations", o.wl_iterations);
  put("feather_order", o.feather_order);
  put("split", o.split);
  put("seed", o.seed);
  put("out", o.out);
  put("config", o.config);
  put("checkpoint", o.checkpoint);
  put("subset", o.subset);
  return j;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << content;
  if (!f) throw ConfigError("failed writing " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

fs::path existing_out_dir(const Options& o) {
  if (!o.out) throw ConfigError("--out DIR is required");
  std::error_code ec;
  if (!fs::is_directory(*o.out, ec)) throw ConfigError("output directory " + *o.out + " does not exist");
  return *o.out;
}

fs::path created_out_dir(const Options& o) {
  if (!o.out) throw ConfigError("--out DIR is required");
  std::error_code ec;
  fs::create_directories(*o.out, ec);
  if (ec || !fs::is_directory(*o.out)) throw ConfigError("cannot create output directory " + *o.out);
  return *o.out;
}

void write_manifest(const fs::path& dir, const Options& o, const json& resolved, const json& dataset,
                    const std::vector<std::string>& outputs) {
  json m = {{"tool", "fcgnn"},
            {"version", kToolVersion},
            {"command", o.command},
            {"options", options_json(o)},
            {"resolved", resolved},
            {"seed", seed_of(o)},
            {"sub_seeds", sub_seeds(seed_of(o))},
            {"dataset", dataset},
            {"outputs", outputs}};
  write_text(dir / "manifest.json", dump(m));
}

const std::vector<std::size_t>& subset_indices(const DatasetSplit& split, const std::string& name,
                                               std::vector<std::size_t>& all) {
  if (name == "test") return split.test_idx;
  if (name == "val") return split.val_idx;
  if (name == "train") return split.train_idx;
  if (name == "all") return all;
  throw ConfigError("--subset must be one of train, val, test, all");
}

// --- model configuration ---------------------------------------------------

ModelConfig resolve_model_config(const Options& o) {
  ModelConfig c = tuned_config(parse_architecture(o.arch.value_or("gcn")));
  if (o.layers) c.num_layers = *o.layers;
  if (o.hidden) c.hidden_dim = *o.hidden;
  if (o.lr) c.learning_rate = *o.lr;
  if (o.wd) c.weight_decay = *o.wd;
  if (o.dropout) c.dropout_rate = *o.dropout;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.batch) c.batch_size = *o.batch;
  c.seed = seed_of(o);
  c.validate();
  return c;
}

BaselineConfig resolve_baseline_config(const Options& o) {
  BaselineConfig c;
  c.kind = parse_baseline_kind(*o.arch);
  if (o.layers) c.mlp.layers = *o.layers;
  if (o.hidden) c.mlp.hidden = *o.hidden;
  if (o.lr) c.mlp.learning_rate = *o.lr;
  if (o.wd) c.mlp.weight_decay = *o.wd;
  if (o.dropout) c.mlp.dropout_rate = *o.dropout;
  if (o.epochs) c.mlp.epochs = *o.epochs;
  if (o.batch) c.mlp.batch_size = *o.batch;
  if (o.bins) c.mlp.bins = *o.bins;
  if (o.wl_iterations) c.wl_iterations = *o.wl_iterations;
  if (o.feather_order) c.feather_order = *o.feather_order;
  if (c.kind != BaselineKind::mlp && o.lr) c.logistic.learning_rate = *o.lr;
  if (c.kind != BaselineKind::mlp && o.epochs) c.logistic.max_epochs = *o.epochs;
  c.seed = seed_of(o);
  c.validate();
  return c;
}

bool is_baseline(const Options& o) { return o.arch && is_baseline_name(*o.arch); }

// --- checkpoint helpers ------------------------------------------------------

void append_ldp_stats(Checkpoint& ckpt, const LdpStats& stats) {
  ckpt.tensors.emplace_back("features.ldp_mean",
                            Tensor2(1, kLdpChannels, std::vector<double>(stats.mean.begin(), stats.mean.end())));
  ckpt.tensors.emplace_back("features.ldp_std",
                            Tensor2(1, kLdpChannels, std::vector<double>(stats.std.begin(), stats.std.end())));
}

LdpStats read_ldp_stats(const Checkpoint& ckpt) {
  const auto& mean = ckpt.tensor("features.ldp_mean");
  const auto& sd = ckpt.tensor("features.ldp_std");
  if (mean.size() != kLdpChannels || sd.size() != kLdpChannels) throw DataError("corrupt LDP statistics");
  LdpStats s;
  std::copy(mean.values().begin(), mean.values().end(), s.mean.begin());
  std::copy(sd.values().begin(), sd.values().end(), s.std.begin());
  return s;
}

// Loads a checkpoint; unreadable or malformed files are configuration errors
// for the commands that consume them.
Checkpoint load_run_checkpoint(const Options& o) {
  if (!o.checkpoint) throw ConfigError("--checkpoint PATH is required");
  try {
    return load_checkpoint(*o.checkpoint);
  } catch (const DataError& e) {
    throw ConfigError(std::string("unusable checkpoint: ") + e.what());
  }
}

std::string checkpoint_arch(const Checkpoint& ckpt) {
  try {
    const auto format = ckpt.descriptor.at("format").get<std::string>();
    if (format == "fcgnn.gnn") return ckpt.descriptor.at("config").at("architecture").get<std::string>();
    if (format == "fcgnn.baseline") return ckpt.descriptor.at("config").at("kind").get<std::string>();
  } catch (const json::exception&) {
  }
  throw ConfigError("checkpoint descriptor does not name a model");
}

struct RunInfo {
  std::vector<std::string> class_names;
  std::uint64_t seed = 1;
  SplitRatios ratios;
};

RunInfo checkpoint_run_info(const Checkpoint& ckpt) {
  try {
    const auto& r = ckpt.descriptor.at("run");
    RunInfo info;
    info.class_names = r.at("class_names").get<std::vector<std::string>>();
    info.seed = r.at("seed").get<std::uint64_t>();
    const auto s = r.at("split").get<std::vector<double>>();
    if (s.size() != 3) throw ConfigError("bad split");
    info.ratios = {s[0], s[1], s[2]};
    return info;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("checkpoint lacks run information: ") + e.what());
  }
}

// Resolves the dataset and split an eval or embed run refers to, defaulting
// seed and ratios to those recorded at training time.
struct EvalContext {
  Checkpoint ckpt;
  std::string arch;
  RunInfo info;
  LabeledGraphSet set;
  SplitRatios ratios;
  DatasetSplit split;
};

EvalContext prepare_eval(Options& o) {
  EvalContext c;
  c.ckpt = load_run_checkpoint(o);
  c.arch = checkpoint_arch(c.ckpt);
  if (o.arch && *o.arch != c.arch) {
    throw ConfigError("--arch " + *o.arch + " does not match the checkpoint architecture " + c.arch);
  }
  c.info = checkpoint_run_info(c.ckpt);
  if (!o.seed) o.seed = c.info.seed;
  c.ratios = o.split ? parse_split(*o.split) : c.info.ratios;
  c.set = load_dataset(o);
  if (c.set.class_names != c.info.class_names) {
    throw ConfigError("dataset families do not match the checkpoint's classes");
  }
  c.split = stratified_split(c.set, c.ratios, seed_of(o));
  return c;
}

// --- commands ---------------------------------------------------------------

int cmd_train(Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  if (!o.out) throw ConfigError("--out DIR is required");
  const SplitRatios ratios = parse_split(o.split.value_or("0.7,0.1,0.2"));
  const bool baseline = is_baseline(o);
  std::optional<ModelConfig> model_cfg;
  std::optional<BaselineConfig> baseline_cfg;
  if (baseline) {
    baseline_cfg = resolve_baseline_config(o);
  } else {
    model_cfg = resolve_model_config(o);
  }

  const LabeledGraphSet set = load_dataset(o);
  const DatasetSplit split = stratified_split(set, ratios, seed_of(o));
  if (split.test_idx.empty()) throw DataError("test split is empty");
  const fs::path dir = created_out_dir(o);

  MetricsReport report;
  TrainHistory history;
  Checkpoint ckpt;
  json resolved;
  if (baseline) {
    const auto clf = BaselineClassifier::fit(*baseline_cfg, set, split, &history);
    const LabeledGraphSet test = set.subset(split.test_idx);
    report = evaluate_predictions(test.labels, clf.predict(test.graphs), set.num_classes(), set.class_names);
    ckpt = clf.to_checkpoint();
    resolved = to_json(*baseline_cfg);
  } else {
    const LabeledGraphSet train = set.subset(split.train_idx);
    const LdpStats stats = fit_ldp_stats(train.graphs);
    const auto features = ldp_feature_set(set.graphs, stats);
    const GraphData data{set.graphs, features, set.labels, set.num_classes()};
    GnnModel model(*model_cfg, kLdpChannels, set.num_classes());
    history = train_gnn(model, data, split.train_idx, split.val_idx);
    report = evaluate_gnn(model, data, split.test_idx, set.class_names);
    ckpt = model.to_checkpoint();
    append_ldp_stats(ckpt, stats);
    resolved = to_json(*model_cfg);
  }
  ckpt.descriptor["run"] = {
      {"class_names", set.class_names}, {"seed", seed_of(o)}, {"split", split_json(ratios)}};
  report.epochs_run = history.epochs.size();
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json metrics = to_json(report, set.class_names);
  metrics["subset"] = "test";
  metrics["num_samples"] = split.test_idx.size();
  metrics["best_epoch"] = history.best_epoch;
  metrics["best_val_accuracy"] = history.best_val_accuracy ? json(*history.best_val_accuracy) : json(nullptr);

  save_checkpoint(dir / kCheckpointFile, ckpt);
  write_text(dir / "metrics.json", dump(metrics));
  std::ostringstream confusion;
  write_confusion_csv(confusion, report, set.class_names);
  write_text(dir / "confusion.csv", confusion.str());
  std::ostringstream hist;
  write_history_csv(hist, history);
  write_text(dir / "history.csv", hist.str());
  resolved["split"] = split_json(ratios);
  resolved["split_sizes"] = {split.train_idx.size(), split.val_idx.size(), split.test_idx.size()};
  write_manifest(dir, o, resolved, dataset_json(o, set),
                 {kCheckpointFile, "metrics.json", "confusion.csv", "history.csv", "manifest.json"});

  out << "trained " << (baseline ? to_string(baseline_cfg->kind) : to_string(model_cfg->architecture)) << ": test accuracy "
      << report.accuracy << ", macro-F1 " << report.macro_f1 << ", " << report.epochs_run << " epochs, "
      << report.runtime_seconds << " s\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  return kExitOk;
}

int cmd_eval(Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path dir = existing_out_dir(o);
  EvalContext c = prepare_eval(o);
  std::vector<std::size_t> all(c.set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::string subset = o.subset.value_or("test");
  const auto& indices = subset_indices(c.split, subset, all);
  if (indices.empty()) throw DataError(subset + " split is empty");

  MetricsReport report;
  try {
    if (c.ckpt.descriptor.value("format", "") == "fcgnn.gnn") {
      const GnnModel model = GnnModel::from_checkpoint(c.ckpt);
      const auto features = ldp_feature_set(c.set.graphs, read_ldp_stats(c.ckpt));
      const GraphData data{c.set.graphs, features, c.set.labels, c.set.num_classes()};
      if (model.num_classes() != c.set.num_classes()) throw ConfigError("class count mismatch");
      report = evaluate_gnn(model, data, indices, c.set.class_names);
    } else {
      const auto clf = BaselineClassifier::from_checkpoint(c.ckpt);
      if (clf.num_classes() != c.set.num_classes()) throw ConfigError("class count mismatch");
      const LabeledGraphSet part = c.set.subset(indices);
      report = evaluate_predictions(part.labels, clf.predict(part.graphs), c.set.num_classes(), c.set.class_names);
    }
  } catch (const DataError& e) {
    throw ConfigError(std::string("checkpoint does not match: ") + e.what());
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json metrics = to_json(report, c.set.class_names);
  metrics["subset"] = subset;
  metrics["num_samples"] = indices.size();
  write_text(dir / "metrics.json", dump(metrics));
  std::ostringstream confusion;
  write_confusion_csv(confusion, report, c.set.class_names);
  write_text(dir / "confusion.csv", confusion.str());
  json resolved = {{"architecture", c.arch},
                   {"checkpoint", *o.checkpoint},
                   {"subset", subset},
                   {"split", split_json(c.ratios)}};
  write_manifest(dir, o, resolved, dataset_json(o, c.set), {"metrics.json", "confusion.csv", "manifest.json"});
  out << "evaluated " << c.arch << " on " << subset << " (" << indices.size() << " graphs): accuracy "
      << report.accuracy << ", macro-F1 " << report.macro_f1 << "\n";
  for (const auto& w : report.warnings) out << "warning: " << w << "\n";
  return kExitOk;
}

int cmd_embed(Options& o, std::ostream& out) {
  const fs::path dir = existing_out_dir(o);
  EvalContext c = prepare_eval(o);
  if (c.ckpt.descriptor.value("format", "") != "fcgnn.gnn") {
    throw ConfigError("embedding export needs a GNN checkpoint, got " + c.arch);
  }
  std::vector<std::size_t> all(c.set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::string subset = o.subset.value_or("all");
  const auto& indices = subset_indices(c.split, subset, all);
  if (indices.empty()) throw DataError(subset + " split is empty");

  GnnModel::Output result;
  try {
    const GnnModel model = GnnModel::from_checkpoint(c.ckpt);
    if (model.num_classes() != c.set.num_classes()) throw ConfigError("class count mismatch");
    const auto features = ldp_feature_set(c.set.graphs, read_ldp_stats(c.ckpt));
    const GraphData data{c.set.graphs, features, c.set.labels, c.set.num_classes()};
    result = gnn_outputs(model, data, indices);
  } catch (const DataError& e) {
    throw ConfigError(std::string("checkpoint does not match: ") + e.what());
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "graph_id,label";
  for (std::size_t k = 0; k < result.embeddings.cols(); ++k) csv << ",e_" << k;
  csv << '\n';
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t g = indices[r];
    csv << c.set.source_ids[g] << ',' << c.set.class_names[c.set.labels[g]];
    for (double v : result.embeddings.row(r)) csv << ',' << v;
    csv << '\n';
  }
  write_text(dir / "embeddings.csv", csv.str());
  json resolved = {{"architecture", c.arch},
                   {"checkpoint", *o.checkpoint},
                   {"subset", subset},
                   {"split", split_json(c.ratios)},
                   {"embedding_dim", result.embeddings.cols()}};
  write_manifest(dir, o, resolved, dataset_json(o, c.set), {"embeddings.csv", "manifest.json"});
  out << "wrote " << indices.size() << " embeddings of width " << result.embeddings.cols() << " to "
      << (dir / "embeddings.csv").string() << "\n";
  return kExitOk;
}

int cmd_stats(Options& o, std::ostream& out) {
  const LabeledGraphSet set = load_dataset(o);
  const FamilyStats stats = family_stats(set);
  print_family_stats(out, stats);
  if (o.out) {
    const fs::path dir = created_out_dir(o);
    std::ostringstream csv;
    write_family_stats_csv(csv, stats);
    write_text(dir / "family_stats.csv", csv.str());
    write_manifest(dir, o, json::object(), dataset_json(o, set), {"family_stats.csv", "manifest.json"});
  }
  return kExitOk;
}

void add_dataset_options(CLI::App& sub, Options& o) {
  auto* data = sub.add_option("--data", o.data, "MalNet-style root: <root>/<family>/<id>.edgelist");
  auto* synth = sub.add_option("--synthetic", o.synthetic, "Generate N synthetic graphs per family");
  data->excludes(synth);
  sub.add_option("--seed", o.seed, "Master seed (default 1)");
  sub.add_option("--config", o.config, "JSON file with default flag values");
}

void add_model_options(CLI::App& sub, Options& o) {
  sub.add_option("--arch", o.arch, "gcn, sage, gin, sgc, jk-gcn, jk-sage, jk-gin, mlp, wl, feather");
  sub.add_option("--layers", o.layers, "Message-passing layers (SGC: hops; MLP: affine maps)");
  sub.add_option("--hidden", o.hidden, "Hidden width");
  sub.add_option("--lr", o.lr, "Adam learning rate");
  sub.add_option("--wd", o.wd, "Decoupled weight decay");
  sub.add_option("--dropout", o.dropout, "Dropout rate in the classifier head");
  sub.add_option("--epochs", o.epochs, "Training epochs (WL/FEATHER: maximum epochs)");
  sub.add_option("--batch", o.batch, "Graphs per mini-batch");
  sub.add_option("--bins", o.bins, "Histogram bins per LDP channel (MLP)");
  sub.add_option("--wl-iterations", o.wl_iterations, "WL refinement iterations");
  sub.add_option("--feather-order", o.feather_order, "FEATHER random-walk order");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  // Training allocates and frees the same large tensors every batch; keep them
  // on the heap instead of round-tripping through mmap.
  static const bool tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    mallopt(M_TOP_PAD, 64 << 20);
    return true;
  }();
  (void)tuned;
  CLI::App app{"Function-call-graph malware family classification", "fcgnn"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  Options o;

  auto* train = app.add_subcommand("train", "Train a GNN or baseline and write checkpoint and metrics");
  add_dataset_options(*train, o);
  add_model_options(*train, o);
  train->add_option("--split", o.split, "Train,val,test ratios (default 0.7,0.1,0.2)");
  train->add_option("--out", o.out, "Output directory (created if missing)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  add_dataset_options(*eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint written by train");
  eval->add_option("--arch", o.arch, "Expected architecture; must match the checkpoint");
  eval->add_option("--split", o.split, "Train,val,test ratios (default: as trained)");
  eval->add_option("--subset", o.subset, "train, val, test or all (default test)");
  eval->add_option("--out", o.out, "Existing output directory");

  auto* embed = app.add_subcommand("embed", "Export pooled graph embeddings from a GNN checkpoint");
  add_dataset_options(*embed, o);
  embed->add_option("--checkpoint", o.checkpoint, "Checkpoint written by train");
  embed->add_option("--arch", o.arch, "Expected architecture; must match the checkpoint");
  embed->add_option("--split", o.split, "Train,val,test ratios (default: as trained)");
  embed->add_option("--subset", o.subset, "train, val, test or all (default all)");
  embed->add_option("--out", o.out, "Existing output directory");

  auto* stats = app.add_subcommand("stats", "Print per-family graph statistics");
  add_dataset_options(*stats, o);
  stats->add_option("--out", o.out, "Optional directory for family_stats.csv");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "fcgnn: usage error: " << e.what() << "\n";
    return kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  o.command = sub->get_name();
  try {
    merge_config_file(o, *sub);
    if (o.command == "train") return cmd_train(o, out);
    if (o.command == "eval") return cmd_eval(o, out);
    if (o.command == "embed") return cmd_embed(o, out);
    return cmd_stats(o, out);
  } catch (const ConfigError& e) {
    err << "fcgnn: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "fcgnn: data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "fcgnn: numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "fcgnn: data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "fcgnn: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::out_of_range& e) {
    err << "fcgnn: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "fcgnn: error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace fcgnn::cli
