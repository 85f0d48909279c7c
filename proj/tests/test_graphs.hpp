// Small graph builders and brute-force oracles shared by the test suites.
#pragma once

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "dkmp/seq_graph.hpp"

namespace dkmp::testing {

inline SeqGraph path_graph(const LocalID n) {
  std::vector<WeightedEdge> edges;
  for (LocalID u = 0; u + 1 < n; ++u) {
    edges.push_back({u, u + 1, 1});
  }
  return SeqGraph::from_edges(n, edges);
}

inline SeqGraph complete_graph(const LocalID n) {
  std::vector<WeightedEdge> edges;
  for (LocalID u = 0; u < n; ++u) {
    for (LocalID v = u + 1; v < n; ++v) {
      edges.push_back({u, v, 1});
    }
  }
  return SeqGraph::from_edges(n, edges);
}

/// Triangles {0,1,2} and {3,4,5} joined by edge (2,3).
inline SeqGraph two_triangles(const bool joined = true) {
  std::vector<WeightedEdge> edges{{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}};
  if (joined) {
    edges.push_back({2, 3, 1});
  }
  return SeqGraph::from_edges(6, edges);
}

inline SeqGraph star_graph(const LocalID leaves) {
  std::vector<WeightedEdge> edges;
  for (LocalID v = 1; v <= leaves; ++v) {
    edges.push_back({0, v, 1});
  }
  return SeqGraph::from_edges(leaves + 1, edges);
}

inline SeqGraph grid_graph(const LocalID rows, const LocalID cols) {
  std::vector<WeightedEdge> edges;
  for (LocalID r = 0; r < rows; ++r) {
    for (LocalID c = 0; c < cols; ++c) {
      const LocalID u = r * cols + c;
      if (c + 1 < cols) {
        edges.push_back({u, u + 1, 1});
      }
      if (r + 1 < rows) {
        edges.push_back({u, u + cols, 1});
      }
    }
  }
  return SeqGraph::from_edges(rows * cols, edges);
}

/// Random simple graph with random vertex and edge weights in [1, max_weight].
inline SeqGraph random_graph(
    const LocalID n, const double edge_probability, std::mt19937_64 &rng, const Weight max_weight = 1
) {
  std::bernoulli_distribution coin(edge_probability);
  std::uniform_int_distribution<Weight> weight(1, max_weight);
  std::vector<WeightedEdge> edges;
  for (LocalID u = 0; u < n; ++u) {
    for (LocalID v = u + 1; v < n; ++v) {
      if (coin(rng)) {
        edges.push_back({u, v, weight(rng)});
      }
    }
  }
  std::vector<Weight> vwgt(n);
  for (auto &w : vwgt) {
    w = weight(rng);
  }
  return SeqGraph::from_edges(n, std::move(vwgt), edges);
}

inline bool is_connected(const SeqGraph &graph) {
  if (graph.n() == 0) {
    return true;
  }
  std::vector<char> seen(graph.n(), 0);
  std::vector<LocalID> stack{0};
  seen[0] = 1;
  LocalID count = 1;
  while (!stack.empty()) {
    const LocalID u = stack.back();
    stack.pop_back();
    graph.for_each_neighbor(u, [&](const LocalID v, Weight) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    });
  }
  return count == graph.n();
}

/// Random connected graph: a random spanning tree plus random extra edges.
inline SeqGraph random_connected_graph(const LocalID n, const double extra_probability, std::mt19937_64 &rng) {
  std::set<std::pair<LocalID, LocalID>> edge_set;
  for (LocalID v = 1; v < n; ++v) {
    std::uniform_int_distribution<LocalID> parent(0, v - 1);
    const LocalID u = parent(rng);
    edge_set.insert({u, v});
  }
  std::bernoulli_distribution coin(extra_probability);
  for (LocalID u = 0; u < n; ++u) {
    for (LocalID v = u + 1; v < n; ++v) {
      if (coin(rng)) {
        edge_set.insert({u, v});
      }
    }
  }
  std::vector<WeightedEdge> edges;
  for (const auto &[u, v] : edge_set) {
    edges.push_back({u, v, 1});
  }
  return SeqGraph::from_edges(n, edges);
}

/// Exhaustive minimum cut over all 2-way partitions whose block weights are
/// at most `max_block_weight`. Returns -1 if none is feasible.
inline Weight brute_force_bisection_cut(const SeqGraph &graph, const Weight max_block_weight) {
  const LocalID n = graph.n();
  Weight best = -1;
  std::vector<BlockID> part(n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    for (LocalID u = 0; u < n; ++u) {
      part[u] = (mask >> u) & 1;
    }
    const auto weights = block_weights(graph, part, 2);
    if (weights[0] > max_block_weight || weights[1] > max_block_weight) {
      continue;
    }
    const Weight cut = edge_cut(graph, part);
    if (best < 0 || cut < best) {
      best = cut;
    }
  }
  return best;
}

} // namespace dkmp::testing
