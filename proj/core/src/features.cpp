#include "fcgnn/features.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "fcgnn/error.hpp"

namespace fcgnn {

// ---------------------------------------------------------------------------
// LDP

Tensor2 ldp(const Graph& g) {
  const std::size_t n = g.num_nodes();
  Tensor2 out(n, kLdpChannels);
  std::vector<double> degrees;
  for (NodeId v = 0; v < n; ++v) {
    const auto nbrs = g.neighbors(v);
    if (nbrs.empty()) continue;
    degrees.clear();
    for (NodeId u : nbrs) degrees.push_back(static_cast<double>(g.degree(u)));
    // Sorted so the floating-point reductions below are order independent.
    std::sort(degrees.begin(), degrees.end());
    const double d = static_cast<double>(degrees.size());
    double sum = 0.0;
    for (double x : degrees) sum += x;
    const double mean = sum / d;
    double sq = 0.0;
    for (double x : degrees) sq += (x - mean) * (x - mean);
    auto row = out.row(v);
    row[0] = d;
    row[1] = degrees.front();
    row[2] = degrees.back();
    row[3] = mean;
    row[4] = std::sqrt(sq / d);
  }
  return out;
}

LdpStats fit_ldp_stats(std::span<const Graph> training_graphs) {
  std::array<double, kLdpChannels> sum{};
  std::array<double, kLdpChannels> sq{};
  double count = 0.0;
  std::vector<Tensor2> logs;
  logs.reserve(training_graphs.size());
  for (const auto& g : training_graphs) {
    Tensor2 f = ldp(g);
    for (double& v : f.values()) v = std::log1p(v);
    for (std::size_t i = 0; i < f.rows(); ++i) {
      for (std::size_t c = 0; c < kLdpChannels; ++c) sum[c] += f(i, c);
    }
    count += static_cast<double>(f.rows());
    logs.push_back(std::move(f));
  }
  if (count == 0.0) throw DataError("cannot fit LDP statistics on an empty corpus");
  LdpStats stats;
  for (std::size_t c = 0; c < kLdpChannels; ++c) stats.mean[c] = sum[c] / count;
  for (const auto& f : logs) {
    for (std::size_t i = 0; i < f.rows(); ++i) {
      for (std::size_t c = 0; c < kLdpChannels; ++c) {
        const double d = f(i, c) - stats.mean[c];
        sq[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < kLdpChannels; ++c) stats.std[c] = std::sqrt(sq[c] / count);
  return stats;
}

Tensor2 standardize_log_ldp(const Tensor2& raw_ldp, const LdpStats& stats) {
  if (raw_ldp.cols() != kLdpChannels) throw std::invalid_argument("expected 5 LDP channels");
  Tensor2 out(raw_ldp.rows(), kLdpChannels);
  for (std::size_t i = 0; i < raw_ldp.rows(); ++i) {
    for (std::size_t c = 0; c < kLdpChannels; ++c) {
      double v = std::log1p(raw_ldp(i, c)) - stats.mean[c];
      if (stats.std[c] > 0.0) v /= stats.std[c];
      out(i, c) = v;
    }
  }
  return out;
}

Tensor2 ldp_node_features(const Graph& g, const LdpStats& stats) { return standardize_log_ldp(ldp(g), stats); }

// ---------------------------------------------------------------------------
// Histograms

HistogramRanges fit_histogram_ranges(std::span<const Graph> training_graphs) {
  HistogramRanges ranges;
  ranges.lo.fill(std::numeric_limits<double>::infinity());
  ranges.hi.fill(-std::numeric_limits<double>::infinity());
  bool any = false;
  for (const auto& g : training_graphs) {
    const Tensor2 f = ldp(g);
    for (std::size_t i = 0; i < f.rows(); ++i) {
      any = true;
      for (std::size_t c = 0; c < kLdpChannels; ++c) {
        ranges.lo[c] = std::min(ranges.lo[c], f(i, c));
        ranges.hi[c] = std::max(ranges.hi[c], f(i, c));
      }
    }
  }
  if (!any) throw DataError("cannot fit histogram ranges on an empty corpus");
  return ranges;
}

std::vector<double> ldp_graph_histogram(const Graph& g, std::size_t bins, const HistogramRanges& ranges) {
  if (bins < 2) throw ConfigError("histogram needs at least 2 bins");
  if (g.num_nodes() == 0) throw DataError("cannot build a histogram for an empty graph");
  const Tensor2 f = ldp(g);
  std::vector<double> out(kLdpChannels * bins, 0.0);
  const double unit = 1.0 / static_cast<double>(g.num_nodes());
  std::vector<std::size_t> counts(kLdpChannels * bins, 0);
  for (std::size_t i = 0; i < f.rows(); ++i) {
    for (std::size_t c = 0; c < kLdpChannels; ++c) {
      const double width = ranges.hi[c] - ranges.lo[c];
      std::size_t b = 0;
      if (width > 0.0) {
        const double pos = std::floor((f(i, c) - ranges.lo[c]) / width * static_cast<double>(bins));
        b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
      }
      ++counts[c * bins + b];
    }
  }
  // Integer counts keep the result independent of node order.
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<double>(counts[k]) * unit;
  return out;
}

// ---------------------------------------------------------------------------
// Weisfeiler-Lehman

WlLabel WlLabelTable::intern(std::uint32_t iteration, const std::vector<std::uint32_t>& signature) {
  auto key = std::make_pair(iteration, signature);
  auto it = ids_.find(key);
  if (it != ids_.end()) return it->second;
  if (frozen_) return kUnknown;
  const auto id = static_cast<WlLabel>(iteration_of_.size());
  ids_.emplace(std::move(key), id);
  iteration_of_.push_back(iteration);
  return id;
}

std::vector<WlLabelTable::Entry> WlLabelTable::entries() const {
  std::vector<Entry> out(iteration_of_.size());
  for (const auto& [key, id] : ids_) out[id] = Entry{key.first, key.second};
  return out;
}

WlLabelTable WlLabelTable::from_entries(const std::vector<Entry>& entries, bool frozen) {
  WlLabelTable table;
  for (const auto& e : entries) {
    if (table.intern(e.iteration, e.signature) != table.size() - 1) {
      throw DataError("duplicate signature in WL label table");
    }
  }
  table.frozen_ = frozen;
  return table;
}

namespace {

// Interns every node's signature, visiting signatures in sorted order so new
// ids do not depend on node numbering.
void intern_all(std::uint32_t iteration, const std::vector<std::vector<std::uint32_t>>& signatures,
                WlLabelTable& table, std::vector<WlLabel>& labels) {
  std::vector<std::size_t> order(signatures.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return signatures[a] < signatures[b]; });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t v = order[k];
    if (k > 0 && signatures[order[k - 1]] == signatures[v]) {
      labels[v] = labels[order[k - 1]];
    } else {
      labels[v] = table.intern(iteration, signatures[v]);
    }
  }
}

}  // namespace

WlFeatureVector wl_refine(const Graph& g, std::uint32_t iterations, WlLabelTable& table) {
  const std::size_t n = g.num_nodes();
  WlFeatureVector out;
  out.iterations = iterations;
  out.unknown.assign(iterations + 1, 0);
  std::map<WlLabel, std::uint64_t> counts;

  std::vector<WlLabel> labels(n);
  std::vector<std::vector<std::uint32_t>> signatures(n);
  for (NodeId v = 0; v < n; ++v) signatures[v].assign(1, static_cast<std::uint32_t>(g.degree(v)));
  intern_all(0, signatures, table, labels);

  auto record = [&](std::uint32_t iteration) {
    for (WlLabel l : labels) {
      if (l == WlLabelTable::kUnknown) {
        ++out.unknown[iteration];
      } else {
        ++counts[l];
      }
    }
  };
  record(0);
  for (std::uint32_t it = 1; it <= iterations; ++it) {
    for (NodeId v = 0; v < n; ++v) {
      auto& sig = signatures[v];
      sig.clear();
      sig.push_back(labels[v]);
      for (NodeId u : g.neighbors(v)) sig.push_back(labels[u]);
      std::sort(sig.begin() + 1, sig.end());
    }
    intern_all(it, signatures, table, labels);
    record(it);
  }
  out.counts.assign(counts.begin(), counts.end());
  return out;
}

double wl_dot(const WlFeatureVector& a, const WlFeatureVector& b) {
  double dot = 0.0;
  auto ia = a.counts.begin();
  auto ib = b.counts.begin();
  while (ia != a.counts.end() && ib != b.counts.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += static_cast<double>(ia->second) * static_cast<double>(ib->second);
      ++ia;
      ++ib;
    }
  }
  return dot;
}

Tensor2 wl_gram(std::span<const WlFeatureVector> vectors) {
  const std::size_t n = vectors.size();
  for (const auto& v : vectors) {
    if (v.iterations != vectors.front().iterations) {
      throw ConfigError("WL vectors built with different iteration counts");
    }
  }
  Tensor2 k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      k(i, j) = k(j, i) = wl_dot(vectors[i], vectors[j]);
    }
  }
  return k;
}

// ---------------------------------------------------------------------------
// FEATHER

FeatherOptions default_feather_options(std::size_t order) {
  FeatherOptions options;
  constexpr std::size_t kPoints = 16;
  constexpr double kMaxTheta = 5.0;
  for (std::size_t i = 1; i <= kPoints; ++i) {
    options.eval_points.push_back(kMaxTheta * static_cast<double>(i) / static_cast<double>(kPoints));
  }
  options.scales = order;
  return options;
}

std::size_t feather_dimension(std::size_t channels, const FeatherOptions& options) {
  return 2 * channels * options.scales * options.eval_points.size();
}

Tensor2 feather_node_values(const Graph& g) {
  Tensor2 f = ldp(g);
  for (double& v : f.values()) v = std::log1p(v);
  return f;
}

std::vector<double> feather_embed(const Graph& g, const Tensor2& node_values, const FeatherOptions& options) {
  if (options.eval_points.empty()) throw ConfigError("FEATHER needs at least one evaluation point");
  if (options.scales < 1) throw ConfigError("FEATHER needs at least one scale");
  const std::size_t n = g.num_nodes();
  if (node_values.rows() != n) throw std::invalid_argument("FEATHER node values must have one row per node");
  if (!node_values.all_finite()) throw ConfigError("FEATHER node values must be finite");
  if (n == 0) throw DataError("cannot embed an empty graph");

  const std::size_t channels = node_values.cols();
  const std::size_t points = options.eval_points.size();
  std::vector<double> out(feather_dimension(channels, options), 0.0);
  std::vector<double> current(n);
  std::vector<double> next(n);
  std::vector<double> scratch;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < points; ++p) {
      const double theta = options.eval_points[p];
      for (std::size_t part = 0; part < 2; ++part) {
        for (NodeId v = 0; v < n; ++v) {
          const double arg = theta * node_values(v, c);
          current[v] = part == 0 ? std::cos(arg) : std::sin(arg);
        }
        for (std::size_t r = 1; r <= options.scales; ++r) {
          for (NodeId u = 0; u < n; ++u) {
            const auto nbrs = g.neighbors(u);
            if (nbrs.empty()) {
              next[u] = current[u];
              continue;
            }
            scratch.clear();
            for (NodeId v : nbrs) scratch.push_back(current[v]);
            next[u] = order_independent_sum(scratch) / static_cast<double>(nbrs.size());
          }
          current.swap(next);
          scratch.assign(current.begin(), current.end());
          const double mean = order_independent_sum(scratch) / static_cast<double>(n);
          out[((c * options.scales + (r - 1)) * points + p) * 2 + part] = mean;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_csv(std::ostream& out, std::span<const std::string> header, const Tensor2& rows) {
  if (!header.empty() && header.size() != rows.cols()) {
    throw std::invalid_argument("CSV header width does not match column count");
  }
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    for (std::size_t j = 0; j < rows.cols(); ++j) out << (j ? "," : "") << rows(i, j);
    out << '\n';
  }
}

}  // namespace fcgnn
