/*******************************************************************************
 * Single address space CSR graph, used for the coarsest graph, for
 * block-induced subgraphs and for ingestion.
 *
 * @file:   seq_graph.hpp
 ******************************************************************************/
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "dkmp/types.hpp"

namespace dkmp {

struct WeightedEdge {
  LocalID u;
  LocalID v;
  Weight weight;
};

class SeqGraph {
public:
  SeqGraph() : _xadj(1, 0) {}

  SeqGraph(
      std::vector<std::uint64_t> xadj,
      std::vector<LocalID> adjncy,
      std::vector<Weight> vertex_weights,
      std::vector<Weight> edge_weights
  )
      : _xadj(std::move(xadj)),
        _adjncy(std::move(adjncy)),
        _vwgt(std::move(vertex_weights)),
        _adjwgt(std::move(edge_weights)) {
    expects(!_xadj.empty(), "xadj must hold n + 1 entries");
    expects(_vwgt.size() + 1 == _xadj.size(), "one weight per vertex");
    expects(_adjwgt.size() == _adjncy.size(), "one weight per edge");
    _total_weight = std::accumulate(_vwgt.begin(), _vwgt.end(), Weight{0});
    _max_weight = _vwgt.empty() ? 0 : *std::max_element(_vwgt.begin(), _vwgt.end());
  }

  /// Builds a graph from undirected edges; every edge is inserted in both
  /// directions. Adjacency lists are sorted by neighbor.
  static SeqGraph
  from_edges(const LocalID n, std::vector<Weight> vertex_weights, std::span<const WeightedEdge> edges) {
    std::vector<std::uint64_t> xadj(n + 1, 0);
    for (const auto &[u, v, w] : edges) {
      ++xadj[u + 1];
      ++xadj[v + 1];
    }
    std::partial_sum(xadj.begin(), xadj.end(), xadj.begin());

    std::vector<std::uint64_t> pos(xadj.begin(), xadj.end() - 1);
    std::vector<LocalID> adjncy(xadj.back());
    std::vector<Weight> adjwgt(xadj.back());
    for (const auto &[u, v, w] : edges) {
      adjncy[pos[u]] = v;
      adjwgt[pos[u]++] = w;
      adjncy[pos[v]] = u;
      adjwgt[pos[v]++] = w;
    }

    SeqGraph graph(std::move(xadj), std::move(adjncy), std::move(vertex_weights), std::move(adjwgt));
    graph.sort_adjacency();
    return graph;
  }

  static SeqGraph from_edges(const LocalID n, std::span<const WeightedEdge> edges) {
    return from_edges(n, std::vector<Weight>(n, 1), edges);
  }

  [[nodiscard]] LocalID n() const { return static_cast<LocalID>(_xadj.size() - 1); }
  [[nodiscard]] std::uint64_t m() const { return _adjncy.size() / 2; }
  [[nodiscard]] std::uint64_t directed_edges() const { return _adjncy.size(); }

  [[nodiscard]] Weight total_weight() const { return _total_weight; }
  [[nodiscard]] Weight max_vertex_weight() const { return _max_weight; }
  [[nodiscard]] Weight vertex_weight(const LocalID u) const { return _vwgt[u]; }
  [[nodiscard]] LocalID degree(const LocalID u) const {
    return static_cast<LocalID>(_xadj[u + 1] - _xadj[u]);
  }

  [[nodiscard]] std::uint64_t first_edge(const LocalID u) const { return _xadj[u]; }
  [[nodiscard]] std::uint64_t last_edge(const LocalID u) const { return _xadj[u + 1]; }
  [[nodiscard]] LocalID edge_target(const std::uint64_t e) const { return _adjncy[e]; }
  [[nodiscard]] Weight edge_weight(const std::uint64_t e) const { return _adjwgt[e]; }

  template <typename Lambda> void for_each_neighbor(const LocalID u, Lambda &&l) const {
    for (std::uint64_t e = _xadj[u]; e < _xadj[u + 1]; ++e) {
      l(_adjncy[e], _adjwgt[e]);
    }
  }

  [[nodiscard]] std::span<const std::uint64_t> raw_xadj() const { return _xadj; }
  [[nodiscard]] std::span<const LocalID> raw_adjncy() const { return _adjncy; }
  [[nodiscard]] std::span<const Weight> raw_vertex_weights() const { return _vwgt; }
  [[nodiscard]] std::span<const Weight> raw_edge_weights() const { return _adjwgt; }

  [[nodiscard]] Weight total_edge_weight() const {
    return std::accumulate(_adjwgt.begin(), _adjwgt.end(), Weight{0}) / 2;
  }

  friend bool operator==(const SeqGraph &, const SeqGraph &) = default;

private:
  void sort_adjacency() {
    std::vector<std::pair<LocalID, Weight>> buf;
    for (LocalID u = 0; u < n(); ++u) {
      buf.clear();
      for (auto e = _xadj[u]; e < _xadj[u + 1]; ++e) {
        buf.emplace_back(_adjncy[e], _adjwgt[e]);
      }
      std::sort(buf.begin(), buf.end());
      for (std::size_t i = 0; i < buf.size(); ++i) {
        _adjncy[_xadj[u] + i] = buf[i].first;
        _adjwgt[_xadj[u] + i] = buf[i].second;
      }
    }
  }

  std::vector<std::uint64_t> _xadj;
  std::vector<LocalID> _adjncy;
  std::vector<Weight> _vwgt;
  std::vector<Weight> _adjwgt;
  Weight _total_weight = 0;
  Weight _max_weight = 0;
};

/// Cut weight of a partition of a sequential graph, each undirected edge
/// counted once.
inline Weight edge_cut(const SeqGraph &graph, std::span<const BlockID> partition) {
  expects(partition.size() == graph.n(), "partition must cover every vertex");
  Weight cut = 0;
  for (LocalID u = 0; u < graph.n(); ++u) {
    expects(partition[u] != kInvalidBlockID, "unassigned vertex");
    graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) {
      if (u < v && partition[u] != partition[v]) {
        cut += w;
      }
    });
  }
  return cut;
}

inline std::vector<Weight>
block_weights(const SeqGraph &graph, std::span<const BlockID> partition, const BlockID k) {
  std::vector<Weight> weights(k, 0);
  for (LocalID u = 0; u < graph.n(); ++u) {
    weights[partition[u]] += graph.vertex_weight(u);
  }
  return weights;
}

//
// Balance constraint
//

/// Imbalance parameters are handled as parts per million so that all bound
/// computations stay in integer arithmetic.
inline constexpr std::int64_t kEpsilonScale = 1'000'000;

inline std::int64_t epsilon_to_ppm(const double eps) {
  expects(eps >= 0.0, "epsilon must be non-negative");
  return static_cast<std::int64_t>(std::llround(eps * static_cast<double>(kEpsilonScale)));
}

namespace detail {
inline Weight ceil_div(const __int128 num, const __int128 den) {
  return static_cast<Weight>((num + den - 1) / den);
}
} // namespace detail

/// Maximum weight of a block that should hold `share_num / share_den` of the
/// total weight: max{(1 + eps) * share, share + max_v c(v)}, evaluated exactly
/// and rounded up.
inline Weight l_max_share(
    const Weight total_weight,
    const std::int64_t share_num,
    const std::int64_t share_den,
    const double eps,
    const Weight max_vertex_weight
) {
  expects(share_den >= 1, "block count must be positive");
  const std::int64_t eps_ppm = epsilon_to_ppm(eps);
  const __int128 scaled = static_cast<__int128>(total_weight) * share_num;
  const Weight relaxed =
      detail::ceil_div(scaled * (kEpsilonScale + eps_ppm), static_cast<__int128>(share_den) * kEpsilonScale);
  const Weight additive = detail::ceil_div(scaled, share_den) + max_vertex_weight;
  return std::max(relaxed, additive);
}

inline Weight
l_max(const Weight total_weight, const BlockID k, const double eps, const Weight max_vertex_weight) {
  expects(k >= 1, "k must be at least 1");
  return l_max_share(total_weight, 1, k, eps, max_vertex_weight);
}

/// max_i c(V_i) * k / c(V) - 1
inline double max_imbalance(std::span<const Weight> block_weights, const Weight total_weight) {
  if (total_weight == 0 || block_weights.empty()) {
    return 0.0;
  }
  const Weight heaviest = *std::max_element(block_weights.begin(), block_weights.end());
  const __int128 num = static_cast<__int128>(heaviest) * static_cast<__int128>(block_weights.size()) -
                       total_weight;
  return static_cast<double>(num) / static_cast<double>(total_weight);
}

} // namespace dkmp
