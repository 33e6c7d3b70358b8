#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fcgnn {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Undirected simple graph in compressed sparse row form.
//
// Every undirected edge {u, v} is stored twice (u -> v and v -> u). Rows are
// strictly increasing, self-loops and duplicates never appear. Instances are
// immutable once built and safe to share across threads.
class Graph {
 public:
  Graph() : row_offsets_{0} {}

  // Symmetrizes the input, drops self-loops and duplicate pairs.
  // Throws ConfigError naming the offending pair when an index is >= num_nodes.
  static Graph from_edge_list(std::span<const Edge> edges, std::size_t num_nodes);

  // Builds directly from CSR arrays, validating every invariant.
  static Graph from_csr(std::vector<std::uint64_t> row_offsets, std::vector<NodeId> col_indices);

  std::size_t num_nodes() const { return row_offsets_.size() - 1; }
  std::size_t num_edges() const { return col_indices_.size() / 2; }

  std::size_t degree(NodeId v) const;

  std::span<const NodeId> neighbors(NodeId v) const {
    return {col_indices_.data() + row_offsets_[v], col_indices_.data() + row_offsets_[v + 1]};
  }

  std::span<const std::uint64_t> row_offsets() const { return row_offsets_; }
  std::span<const NodeId> col_indices() const { return col_indices_; }

  // Each undirected edge once, as (u, v) with u < v, in row order.
  std::vector<Edge> edge_list() const;

  bool operator==(const Graph&) const = default;

 private:
  Graph(std::vector<std::uint64_t> row_offsets, std::vector<NodeId> col_indices)
      : row_offsets_(std::move(row_offsets)), col_indices_(std::move(col_indices)) {}

  std::vector<std::uint64_t> row_offsets_;
  std::vector<NodeId> col_indices_;
};

inline std::size_t degree(const Graph& g, NodeId v) { return g.degree(v); }

// Relabels node v as perm[v]. Throws ConfigError unless perm is a bijection on
// [0, num_nodes).
Graph permute(const Graph& g, std::span<const NodeId> perm);

// Degrees sorted ascending; a cheap isomorphism invariant.
std::vector<std::size_t> sorted_degree_sequence(const Graph& g);

// Disjoint union with node ids offset in argument order.
Graph disjoint_union(std::span<const Graph> graphs);

}  // namespace fcgnn
