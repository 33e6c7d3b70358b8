#pragma once

#include <numeric>
#include <set>
#include <vector>

#include "fcgnn/graph.hpp"
#include "fcgnn/rng.hpp"

namespace fcgnn::testing {

// G(n, p) sample; n is drawn from [min_nodes, max_nodes].
inline Graph random_graph(Rng& rng, std::size_t min_nodes, std::size_t max_nodes, double p) {
  const std::size_t n = min_nodes + rng.below(max_nodes - min_nodes + 1);
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (rng.uniform() < p) edges.emplace_back(u, v);
    }
  }
  return Graph::from_edge_list(edges, n);
}

inline std::vector<NodeId> random_permutation(Rng& rng, std::size_t n) {
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<NodeId>(perm));
  return perm;
}

inline Graph path_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
  return Graph::from_edge_list(edges, n);
}

inline Graph cycle_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (NodeId v = 0; v < n; ++v) edges.emplace_back(v, static_cast<NodeId>((v + 1) % n));
  return Graph::from_edge_list(edges, n);
}

inline Graph star_graph(std::size_t leaves) {
  std::vector<Edge> edges;
  for (NodeId v = 1; v <= leaves; ++v) edges.emplace_back(0, v);
  return Graph::from_edge_list(edges, leaves + 1);
}

}  // namespace fcgnn::testing
