#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fcgnn/graph.hpp"
#include "fcgnn/tensor.hpp"

namespace fcgnn {

// ---------------------------------------------------------------------------
// Local Degree Profile
// ---------------------------------------------------------------------------

inline constexpr std::size_t kLdpChannels = 5;
inline const std::array<std::string, kLdpChannels> kLdpChannelNames = {
    "degree", "min_neighbor_degree", "max_neighbor_degree", "mean_neighbor_degree",
    "std_neighbor_degree"};

// One row per node: (d(v), min, max, mean, std) over the degrees of v's
// neighbors, std being the population deviation. Isolated nodes get zeros.
Tensor2 ldp(const Graph& g);

// Per-channel mean/std of log(1 + LDP) over a training corpus.
struct LdpStats {
  std::array<double, kLdpChannels> mean{};
  std::array<double, kLdpChannels> std{1.0, 1.0, 1.0, 1.0, 1.0};
};

LdpStats fit_ldp_stats(std::span<const Graph> training_graphs);

// (log(1 + x) - mean_c) / std_c per channel; channels with zero std are only
// centered.
Tensor2 ldp_node_features(const Graph& g, const LdpStats& stats);
Tensor2 standardize_log_ldp(const Tensor2& raw_ldp, const LdpStats& stats);

// ---------------------------------------------------------------------------
// LDP histograms (fixed-length graph features for the MLP baseline)
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultHistogramBins = 32;

struct HistogramRanges {
  std::array<double, kLdpChannels> lo{};
  std::array<double, kLdpChannels> hi{};
};

// Per-channel [min, max] of raw LDP values over the training graphs.
HistogramRanges fit_histogram_ranges(std::span<const Graph> training_graphs);

// 5 * bins values: per channel, the fraction of nodes falling in each of
// `bins` equal-width bins over [lo, hi]; out-of-range values clamp to the edge
// bins. Every channel sums to 1.
std::vector<double> ldp_graph_histogram(const Graph& g, std::size_t bins, const HistogramRanges& ranges);

// ---------------------------------------------------------------------------
// Weisfeiler-Lehman subtree features
// ---------------------------------------------------------------------------

using WlLabel = std::uint32_t;

// Corpus-wide label compression table. Ids are handed out in first-encounter
// order; once frozen, unseen signatures map to kUnknown.
class WlLabelTable {
 public:
  static constexpr WlLabel kUnknown = UINT32_MAX;

  WlLabel intern(std::uint32_t iteration, const std::vector<std::uint32_t>& signature);

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  std::size_t size() const { return iteration_of_.size(); }
  std::uint32_t iteration_of(WlLabel label) const { return iteration_of_.at(label); }

  // Signatures in id order, for persistence.
  struct Entry {
    std::uint32_t iteration;
    std::vector<std::uint32_t> signature;
  };
  std::vector<Entry> entries() const;
  static WlLabelTable from_entries(const std::vector<Entry>& entries, bool frozen);

 private:
  std::map<std::pair<std::uint32_t, std::vector<std::uint32_t>>, WlLabel> ids_;
  std::vector<std::uint32_t> iteration_of_;
  bool frozen_ = false;
};

struct WlFeatureVector {
  std::uint32_t iterations = 0;
  // (label id, count), sorted by label id; ids encode their iteration.
  std::vector<std::pair<WlLabel, std::uint64_t>> counts;
  // Nodes whose label was unseen by a frozen table, per iteration.
  std::vector<std::uint64_t> unknown;
};

// Iteration 0 labels are node degrees; iteration i relabels v by
// (label(v), sorted neighbor labels) compressed through `table`.
WlFeatureVector wl_refine(const Graph& g, std::uint32_t iterations, WlLabelTable& table);

double wl_dot(const WlFeatureVector& a, const WlFeatureVector& b);

// K[i][j] = <phi_i, phi_j>. Throws ConfigError on mismatched iteration counts.
Tensor2 wl_gram(std::span<const WlFeatureVector> vectors);

// ---------------------------------------------------------------------------
// FEATHER characteristic-function embeddings
// ---------------------------------------------------------------------------

struct FeatherOptions {
  std::vector<double> eval_points;
  std::size_t scales = 2;  // random-walk orders 1..scales
};

// 16 evenly spaced evaluation points in (0, 5] and scales 1..order.
FeatherOptions default_feather_options(std::size_t order = 2);

std::size_t feather_dimension(std::size_t channels, const FeatherOptions& options);

// Node values used by default: log(1 + LDP).
Tensor2 feather_node_values(const Graph& g);

// Mean over nodes of sum_v (P^r)[u][v] * (cos, sin)(theta * x_v), where P is
// the row-normalized adjacency with identity rows for isolated nodes. Layout:
// index = ((channel * scales + (r - 1)) * points + point) * 2 + {0: cos, 1: sin}.
std::vector<double> feather_embed(const Graph& g, const Tensor2& node_values, const FeatherOptions& options);

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

void write_csv(std::ostream& out, std::span<const std::string> header, const Tensor2& rows);

}  // namespace fcgnn
