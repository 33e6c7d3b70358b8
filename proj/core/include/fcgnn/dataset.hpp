#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fcgnn/graph.hpp"

namespace fcgnn {

struct LabeledGraphSet {
  std::vector<Graph> graphs;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;  // unique, sorted
  std::vector<std::string> source_ids;

  std::size_t size() const { return graphs.size(); }
  std::size_t num_classes() const { return class_names.size(); }

  // Throws DataError when any invariant is broken.
  void validate() const;

  LabeledGraphSet subset(const std::vector<std::size_t>& indices) const;
};

// ---------------------------------------------------------------------------
// Edge-list files: one "src dst" pair of non-negative base-10 integers per
// line, whitespace separated. Lines whose first non-blank character is '#'
// and blank lines are skipped. Node ids are remapped densely in ascending id
// order.

struct ParsedEdgeList {
  Graph graph;
  std::vector<std::uint64_t> original_ids;  // dense index -> id in the file
};

ParsedEdgeList parse_edge_list(std::istream& in, const std::string& source_name);
ParsedEdgeList read_edge_list_file(const std::filesystem::path& path);

// Loads <root>/<family>/**/*.edgelist. Families and files are enumerated in
// lexicographic order, so the result is the same on every run.
LabeledGraphSet load_malnet_dir(const std::filesystem::path& root);

// Writes a set back out in the same layout (used by tests and tooling).
void write_malnet_dir(const LabeledGraphSet& set, const std::filesystem::path& root);

// ---------------------------------------------------------------------------

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct DatasetSplit {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;
};

// Per-class seeded shuffle, then a largest-remainder allocation of each class
// to the three splits. Ratios must be non-negative with a positive train share
// and sum to 1; a zero ratio yields an empty split. Every split with a
// positive ratio receives at least one sample of every class. Shuffles use
// the "split" sub-seed of `seed`.
DatasetSplit stratified_split(const LabeledGraphSet& set, const SplitRatios& ratios, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic five-family corpus.
//
//   family       generator                         nodes          edges/node
//   addisplay    preferential attachment, m = 2    U[20, 50]      ~2
//   adware       preferential attachment, m = 3    U[25, 55]      ~3
//   benign       preferential attachment, m = 4    U[20, 45]      ~4
//   downloader   random recursive tree plus        N(51, 4.9)     ~1.14
//                round(0.14 n + 1) extra edges     clamped [40,117]
//   trojan       preferential attachment, m = 5    U[15, 40]      ~5
//
// Preferential attachment starts from a clique on m + 1 nodes and attaches
// each new node to m distinct existing nodes with probability proportional
// to degree. All draws use the "synth" sub-seed of `seed`.

LabeledGraphSet synth_families(std::size_t per_class, std::uint64_t seed);

// ---------------------------------------------------------------------------

struct SummaryStats {
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;  // lower middle element for even counts
  double stddev = 0.0;  // population
};

SummaryStats summarize(std::vector<double> values);

struct FamilyRow {
  std::string family;
  std::size_t graphs = 0;
  SummaryStats vertices;
  SummaryStats edges;
  double average_degree = 0.0;  // mean over graphs of 2 E / N
  double edges_per_node = 0.0;  // mean over graphs of E / N
};

struct FamilyStats {
  std::vector<FamilyRow> rows;
};

FamilyStats family_stats(const LabeledGraphSet& set);

// Aligned text table, one row per family.
void print_family_stats(std::ostream& out, const FamilyStats& stats);
void write_family_stats_csv(std::ostream& out, const FamilyStats& stats);

}  // namespace fcgnn
