#include "fcgnn/graph.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <string>

#include "fcgnn/error.hpp"

namespace fcgnn {

namespace {

Graph build_from_adjacency(std::vector<std::vector<NodeId>>& adjacency) {
  std::vector<std::uint64_t> offsets(adjacency.size() + 1, 0);
  std::vector<NodeId> cols;
  for (std::size_t v = 0; v < adjacency.size(); ++v) {
    auto& row = adjacency[v];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    offsets[v + 1] = offsets[v] + row.size();
  }
  cols.reserve(offsets.back());
  for (const auto& row : adjacency) cols.insert(cols.end(), row.begin(), row.end());
  return Graph::from_csr(std::move(offsets), std::move(cols));
}

}  // namespace

Graph Graph::from_edge_list(std::span<const Edge> edges, std::size_t num_nodes) {
  std::vector<std::vector<NodeId>> adjacency(num_nodes);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto [u, v] = edges[i];
    if (u >= num_nodes || v >= num_nodes) {
      std::ostringstream msg;
      msg << "edge #" << i << " (" << u << ", " << v << ") out of range for " << num_nodes
          << " nodes";
      throw ConfigError(msg.str());
    }
    if (u == v) continue;
    adjacency[u].push_back(v);
    adjacency[v].push_back(u);
  }
  return build_from_adjacency(adjacency);
}

Graph Graph::from_csr(std::vector<std::uint64_t> row_offsets, std::vector<NodeId> col_indices) {
  if (row_offsets.empty() || row_offsets.front() != 0 || row_offsets.back() != col_indices.size()) {
    throw ConfigError("CSR row offsets must start at 0 and end at the column count");
  }
  const std::size_t n = row_offsets.size() - 1;
  for (std::size_t v = 0; v < n; ++v) {
    if (row_offsets[v] > row_offsets[v + 1]) throw ConfigError("CSR row offsets must be non-decreasing");
    for (auto k = row_offsets[v]; k < row_offsets[v + 1]; ++k) {
      const NodeId u = col_indices[k];
      if (u >= n) throw ConfigError("CSR column index out of range");
      if (u == v) throw ConfigError("CSR contains a self-loop at node " + std::to_string(v));
      if (k > row_offsets[v] && col_indices[k - 1] >= u) {
        throw ConfigError("CSR row " + std::to_string(v) + " is not strictly increasing");
      }
    }
  }
  Graph g(std::move(row_offsets), std::move(col_indices));
  for (NodeId v = 0; v < n; ++v) {
    for (NodeId u : g.neighbors(v)) {
      auto row = g.neighbors(u);
      if (!std::binary_search(row.begin(), row.end(), v)) {
        throw ConfigError("CSR adjacency is not symmetric");
      }
    }
  }
  return g;
}

std::size_t Graph::degree(NodeId v) const {
  if (v >= num_nodes()) {
    throw std::out_of_range("node " + std::to_string(v) + " out of range for " +
                            std::to_string(num_nodes()) + " nodes");
  }
  return row_offsets_[v + 1] - row_offsets_[v];
}

std::vector<Edge> Graph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeId v = 0; v < num_nodes(); ++v) {
    for (NodeId u : neighbors(v)) {
      if (v < u) out.emplace_back(v, u);
    }
  }
  return out;
}

Graph permute(const Graph& g, std::span<const NodeId> perm) {
  const std::size_t n = g.num_nodes();
  if (perm.size() != n) throw ConfigError("permutation length does not match node count");
  std::vector<bool> seen(n, false);
  for (NodeId p : perm) {
    if (p >= n || seen[p]) throw ConfigError("permutation is not a bijection");
    seen[p] = true;
  }
  std::vector<std::vector<NodeId>> adjacency(n);
  for (NodeId v = 0; v < n; ++v) {
    auto& row = adjacency[perm[v]];
    for (NodeId u : g.neighbors(v)) row.push_back(perm[u]);
  }
  return build_from_adjacency(adjacency);
}

std::vector<std::size_t> sorted_degree_sequence(const Graph& g) {
  std::vector<std::size_t> degrees(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) degrees[v] = g.degree(v);
  std::sort(degrees.begin(), degrees.end());
  return degrees;
}

Graph disjoint_union(std::span<const Graph> graphs) {
  std::size_t total_nodes = 0;
  std::size_t total_cols = 0;
  for (const auto& g : graphs) {
    total_nodes += g.num_nodes();
    total_cols += g.col_indices().size();
  }
  std::vector<std::uint64_t> offsets;
  offsets.reserve(total_nodes + 1);
  offsets.push_back(0);
  std::vector<NodeId> cols;
  cols.reserve(total_cols);
  NodeId base = 0;
  for (const auto& g : graphs) {
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      for (NodeId u : g.neighbors(v)) cols.push_back(u + base);
      offsets.push_back(cols.size());
    }
    base += static_cast<NodeId>(g.num_nodes());
  }
  return Graph::from_csr(std::move(offsets), std::move(cols));
}

}  // namespace fcgnn
