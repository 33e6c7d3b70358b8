#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "fcgnn/error.hpp"
#include "fcgnn/gnn.hpp"

namespace fcgnn {

BatchedGraph batch_graphs(std::span<const Graph* const> graphs) {
  BatchedGraph out;
  out.num_graphs = graphs.size();
  out.node_offsets.assign(1, 0);
  std::size_t total_nodes = 0;
  std::size_t total_cols = 0;
  for (const Graph* g : graphs) {
    total_nodes += g->num_nodes();
    total_cols += g->col_indices().size();
  }
  std::vector<std::uint64_t> offsets;
  offsets.reserve(total_nodes + 1);
  offsets.push_back(0);
  std::vector<NodeId> cols;
  cols.reserve(total_cols);
  out.graph_id.reserve(total_nodes);
  NodeId base = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = *graphs[gi];
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      for (NodeId u : g.neighbors(v)) cols.push_back(u + base);
      offsets.push_back(cols.size());
      out.graph_id.push_back(gi);
    }
    base += static_cast<NodeId>(g.num_nodes());
    out.node_offsets.push_back(base);
  }
  out.merged = Graph::from_csr(std::move(offsets), std::move(cols));
  return out;
}

Tensor2 stack_rows(std::span<const Tensor2* const> blocks) {
  if (blocks.empty()) return {};
  const std::size_t cols = blocks.front()->cols();
  std::size_t rows = 0;
  for (const Tensor2* b : blocks) {
    if (b->cols() != cols) {
      throw std::invalid_argument("stack_rows: column mismatch " + b->shape_string() + " vs " +
                                  blocks.front()->shape_string());
    }
    rows += b->rows();
  }
  Tensor2 out(rows, cols);
  double* dst = out.data();
  for (const Tensor2* b : blocks) {
    if (b->size() != 0) std::memcpy(dst, b->data(), b->size() * sizeof(double));
    dst += b->size();
  }
  return out;
}

std::pair<BatchedGraph, Tensor2> batch(std::span<const Graph> graphs, std::span<const Tensor2> features) {
  if (graphs.size() != features.size()) {
    throw std::invalid_argument("batch: " + std::to_string(graphs.size()) + " graphs but " +
                                std::to_string(features.size()) + " feature matrices");
  }
  std::vector<const Graph*> gp;
  std::vector<const Tensor2*> fp;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (features[i].rows() != graphs[i].num_nodes()) {
      throw std::invalid_argument("batch: feature rows do not match node count for graph " + std::to_string(i));
    }
    gp.push_back(&graphs[i]);
    fp.push_back(&features[i]);
  }
  return {batch_graphs(gp), stack_rows(fp)};
}

// ---------------------------------------------------------------------------

SparseOperator::SparseOperator(std::size_t n, std::vector<std::uint64_t> offsets, std::vector<NodeId> cols,
                               std::vector<double> values)
    : n_(n), offsets_(std::move(offsets)), cols_(std::move(cols)), values_(std::move(values)) {
  if (offsets_.size() != n_ + 1 || cols_.size() != values_.size() || offsets_.back() != cols_.size()) {
    throw std::invalid_argument("sparse operator: inconsistent CSR arrays");
  }
}

double SparseOperator::at(std::size_t row, std::size_t col) const {
  for (auto k = offsets_.at(row); k < offsets_[row + 1]; ++k) {
    if (cols_[k] == col) return values_[k];
  }
  return 0.0;
}

Tensor2 SparseOperator::apply(const Tensor2& h) const {
  if (h.rows() != n_) {
    throw std::invalid_argument("sparse apply: operator is " + std::to_string(n_) + "x" + std::to_string(n_) +
                                ", input " + h.shape_string());
  }
  const std::size_t m = h.cols();
  Tensor2 out(n_, m);
  const auto n = static_cast<std::ptrdiff_t>(n_);
#pragma omp parallel
  {
    std::vector<std::uint64_t> order;
#pragma omp for schedule(static)
    for (std::ptrdiff_t v = 0; v < n; ++v) {
      const auto begin = offsets_[v];
      const auto end = offsets_[v + 1];
      order.clear();
      for (auto k = begin; k < end; ++k) order.push_back(k);
      if (order.size() > 1) {
        std::sort(order.begin(), order.end(), [&](std::uint64_t a, std::uint64_t b) {
          if (values_[a] != values_[b]) return values_[a] < values_[b];
          auto ra = h.row(cols_[a]);
          auto rb = h.row(cols_[b]);
          return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
        });
      }
      double* o = out.row(v).data();
      for (auto k : order) {
        const double w = values_[k];
        const double* src = h.row(cols_[k]).data();
        for (std::size_t j = 0; j < m; ++j) o[j] += w * src[j];
      }
    }
  }
  return out;
}

Tensor2 SparseOperator::apply_transpose(const Tensor2& h) const {
  if (h.rows() != n_) throw std::invalid_argument("sparse apply_transpose: shape mismatch " + h.shape_string());
  const std::size_t m = h.cols();
  Tensor2 out(n_, m);
  for (std::size_t v = 0; v < n_; ++v) {
    const double* src = h.row(v).data();
    for (auto k = offsets_[v]; k < offsets_[v + 1]; ++k) {
      const double w = values_[k];
      double* o = out.row(cols_[k]).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += w * src[j];
    }
  }
  return out;
}

SparseOperator normalized_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::uint64_t> offsets(n + 1, 0);
  std::vector<NodeId> cols;
  std::vector<double> values;
  cols.reserve(g.col_indices().size() + n);
  values.reserve(g.col_indices().size() + n);
  for (NodeId v = 0; v < n; ++v) {
    const double dv = static_cast<double>(g.degree(v) + 1);
    bool self_done = false;
    auto push = [&](NodeId u) {
      const double du = static_cast<double>(g.degree(u) + 1);
      cols.push_back(u);
      values.push_back(1.0 / std::sqrt(dv * du));
    };
    for (NodeId u : g.neighbors(v)) {
      if (!self_done && u > v) {
        push(v);
        self_done = true;
      }
      push(u);
    }
    if (!self_done) push(v);
    offsets[v + 1] = cols.size();
  }
  return SparseOperator(n, std::move(offsets), std::move(cols), std::move(values));
}

SparseOperator mean_adjacency(const Graph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::uint64_t> offsets(g.row_offsets().begin(), g.row_offsets().end());
  std::vector<NodeId> cols(g.col_indices().begin(), g.col_indices().end());
  std::vector<double> values(cols.size());
  for (NodeId v = 0; v < n; ++v) {
    const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(1, g.degree(v)));
    for (auto k = offsets[v]; k < offsets[v + 1]; ++k) values[k] = inv;
  }
  return SparseOperator(n, std::move(offsets), std::move(cols), std::move(values));
}

SparseOperator sum_adjacency(const Graph& g) {
  std::vector<std::uint64_t> offsets(g.row_offsets().begin(), g.row_offsets().end());
  std::vector<NodeId> cols(g.col_indices().begin(), g.col_indices().end());
  std::vector<double> values(cols.size(), 1.0);
  return SparseOperator(g.num_nodes(), std::move(offsets), std::move(cols), std::move(values));
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::size_t>> group_rows(std::span<const std::size_t> graph_id, std::size_t num_graphs) {
  std::vector<std::vector<std::size_t>> groups(num_graphs);
  for (std::size_t i = 0; i < graph_id.size(); ++i) {
    if (graph_id[i] >= num_graphs) throw std::out_of_range("graph id out of range in pooling");
    groups[graph_id[i]].push_back(i);
  }
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (groups[g].empty()) throw ConfigError("graph " + std::to_string(g) + " in batch has no nodes");
  }
  return groups;
}

}  // namespace

Tensor2 global_mean_pool(const Tensor2& h, std::span<const std::size_t> graph_id, std::size_t num_graphs) {
  if (graph_id.size() != h.rows()) throw std::invalid_argument("pool: graph id count does not match rows");
  auto groups = group_rows(graph_id, num_graphs);
  Tensor2 out(num_graphs, h.cols());
  for (std::size_t g = 0; g < num_graphs; ++g) {
    auto& rows = groups[g];
    std::sort(rows.begin(), rows.end(), [&h](std::size_t a, std::size_t b) {
      auto ra = h.row(a);
      auto rb = h.row(b);
      return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    auto o = out.row(g);
    for (std::size_t i : rows) {
      auto r = h.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) o[j] += r[j];
    }
    const double count = static_cast<double>(rows.size());
    for (double& v : o) v /= count;
  }
  return out;
}

Tensor2 global_mean_pool_backward(const Tensor2& dpooled, std::span<const std::size_t> graph_id,
                                  std::size_t num_graphs) {
  std::vector<double> counts(num_graphs, 0.0);
  for (std::size_t g : graph_id) counts.at(g) += 1.0;
  Tensor2 dh(graph_id.size(), dpooled.cols());
  for (std::size_t i = 0; i < graph_id.size(); ++i) {
    auto src = dpooled.row(graph_id[i]);
    auto dst = dh.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / counts[graph_id[i]];
  }
  return dh;
}

Tensor2 jk_concat(std::span<const Tensor2> per_layer) {
  if (per_layer.empty()) throw std::invalid_argument("jk_concat: no layers");
  return hconcat(per_layer);
}

}  // namespace fcgnn
