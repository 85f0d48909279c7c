/*******************************************************************************
 * 1D-partitioned distributed graph with ghost vertices.
 *
 * PE p owns the consecutive global range [vtxdist[p], vtxdist[p + 1]). Local
 * IDs 0 .. n_owned - 1 are owned vertices in global order; local IDs from
 * n_owned on are ghost vertices, numbered in increasing global ID order.
 * Ghosts have a weight but no outgoing edges.
 *
 * @file:   dist_graph.hpp
 ******************************************************************************/
#pragma once

#include <algorithm>
#include <array>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "dkmp/msg/sparse_alltoall.hpp"
#include "dkmp/seq_graph.hpp"

namespace dkmp {

/// Consecutive ranges of size ceil(n / P) or floor(n / P); the larger ranges
/// come first.
inline std::vector<GlobalID> balanced_distribution(const GlobalID n, const int pes) {
  expects(pes >= 1, "need at least one PE");
  std::vector<GlobalID> vtxdist(pes + 1, 0);
  const GlobalID base = n / pes;
  const GlobalID rest = n % pes;
  for (int p = 0; p < pes; ++p) {
    vtxdist[p + 1] = vtxdist[p] + base + (static_cast<GlobalID>(p) < rest ? 1 : 0);
  }
  return vtxdist;
}

inline PEID owner_of(std::span<const GlobalID> vtxdist, const GlobalID gid) {
  const auto it = std::upper_bound(vtxdist.begin(), vtxdist.end(), gid);
  return static_cast<PEID>(it - vtxdist.begin()) - 1;
}

class DistGraph {
public:
  struct Totals {
    std::uint64_t m = 0;
    Weight total_weight = 0;
    Weight max_vertex_weight = 0;
  };

  DistGraph() = default;

  /// Builds the local part from owned adjacency given in global IDs.
  /// `ghost_weight` is queried once per distinct ghost vertex.
  template <typename GhostWeight>
  DistGraph(
      std::vector<GlobalID> vtxdist,
      const int rank,
      std::vector<std::uint64_t> xadj,
      std::span<const GlobalID> adjncy_global,
      std::vector<Weight> adjwgt,
      std::vector<Weight> owned_weights,
      GhostWeight &&ghost_weight,
      const Totals &totals
  )
      : _vtxdist(std::move(vtxdist)),
        _rank(rank),
        _xadj(std::move(xadj)),
        _adjwgt(std::move(adjwgt)),
        _vwgt(std::move(owned_weights)),
        _totals(totals) {
    _first = _vtxdist[rank];
    _n_owned = static_cast<LocalID>(_vtxdist[rank + 1] - _vtxdist[rank]);
    expects(_xadj.size() == static_cast<std::size_t>(_n_owned) + 1, "xadj must hold n_owned + 1 entries");
    expects(_vwgt.size() == _n_owned, "one weight per owned vertex");
    expects(adjncy_global.size() == _adjwgt.size(), "one weight per edge");

    for (const GlobalID v : adjncy_global) {
      if (!is_owned_global(v)) {
        _ghost_to_global.push_back(v);
      }
    }
    std::sort(_ghost_to_global.begin(), _ghost_to_global.end());
    _ghost_to_global.erase(std::unique(_ghost_to_global.begin(), _ghost_to_global.end()), _ghost_to_global.end());
    _global_to_ghost.reserve(_ghost_to_global.size());
    _ghost_owner.resize(_ghost_to_global.size());
    for (std::size_t i = 0; i < _ghost_to_global.size(); ++i) {
      const GlobalID gid = _ghost_to_global[i];
      _global_to_ghost.emplace(gid, static_cast<LocalID>(_n_owned + i));
      _ghost_owner[i] = owner_of(_vtxdist, gid);
      _vwgt.push_back(ghost_weight(gid));
    }

    _adjncy.resize(adjncy_global.size());
    for (std::size_t e = 0; e < adjncy_global.size(); ++e) {
      _adjncy[e] = global_to_local(adjncy_global[e]);
    }

    build_interface();
    build_ghost_adjacency();
  }

  [[nodiscard]] int rank() const {
    return _rank;
  }
  [[nodiscard]] int pes() const {
    return static_cast<int>(_vtxdist.size()) - 1;
  }
  [[nodiscard]] std::span<const GlobalID> vtxdist() const {
    return _vtxdist;
  }
  [[nodiscard]] GlobalID offset() const {
    return _first;
  }

  [[nodiscard]] LocalID n_owned() const {
    return _n_owned;
  }
  [[nodiscard]] LocalID n_ghost() const {
    return static_cast<LocalID>(_ghost_to_global.size());
  }
  [[nodiscard]] LocalID n_total() const {
    return _n_owned + n_ghost();
  }
  [[nodiscard]] std::uint64_t local_directed_edges() const {
    return _adjncy.size();
  }

  [[nodiscard]] GlobalID global_n() const {
    return _vtxdist.back();
  }
  [[nodiscard]] std::uint64_t global_m() const {
    return _totals.m;
  }
  [[nodiscard]] Weight total_weight() const {
    return _totals.total_weight;
  }
  [[nodiscard]] Weight max_vertex_weight() const {
    return _totals.max_vertex_weight;
  }

  [[nodiscard]] bool is_owned(const LocalID u) const {
    return u < _n_owned;
  }
  [[nodiscard]] bool is_owned_global(const GlobalID gid) const {
    return gid >= _first && gid < _first + _n_owned;
  }

  [[nodiscard]] GlobalID local_to_global(const LocalID u) const {
    return u < _n_owned ? _first + u : _ghost_to_global[u - _n_owned];
  }

  [[nodiscard]] LocalID global_to_local(const GlobalID gid) const {
    if (is_owned_global(gid)) {
      return static_cast<LocalID>(gid - _first);
    }
    const auto it = _global_to_ghost.find(gid);
    return it == _global_to_ghost.end() ? kInvalidLocalID : it->second;
  }

  [[nodiscard]] PEID ghost_owner(const LocalID u) const {
    return _ghost_owner[u - _n_owned];
  }
  [[nodiscard]] PEID owner(const LocalID u) const {
    return is_owned(u) ? _rank : ghost_owner(u);
  }

  [[nodiscard]] Weight vertex_weight(const LocalID u) const {
    return _vwgt[u];
  }
  [[nodiscard]] LocalID degree(const LocalID u) const {
    return static_cast<LocalID>(_xadj[u + 1] - _xadj[u]);
  }

  template <typename Lambda> void for_each_neighbor(const LocalID u, Lambda &&l) const {
    for (std::uint64_t e = _xadj[u]; e < _xadj[u + 1]; ++e) {
      l(_adjncy[e], _adjwgt[e]);
    }
  }

  /// Distinct PEs holding owned vertex `u` as a ghost.
  [[nodiscard]] std::span<const PEID> interface_pes(const LocalID u) const {
    return {_interface_pes.data() + _interface_xadj[u], _interface_pes.data() + _interface_xadj[u + 1]};
  }
  [[nodiscard]] bool is_interface(const LocalID u) const {
    return _interface_xadj[u + 1] > _interface_xadj[u];
  }

  /// Owned vertices adjacent to a ghost vertex.
  [[nodiscard]] std::span<const LocalID> ghost_neighbors(const LocalID ghost) const {
    const LocalID i = ghost - _n_owned;
    return {_ghost_adj.data() + _ghost_adj_xadj[i], _ghost_adj.data() + _ghost_adj_xadj[i + 1]};
  }

  void set_ghost_weights(std::span<const Weight> weights) {
    expects(weights.size() == n_ghost(), "one weight per ghost vertex");
    std::copy(weights.begin(), weights.end(), _vwgt.begin() + _n_owned);
  }

private:
  void build_interface() {
    _interface_xadj.assign(_n_owned + 1, 0);
    std::vector<LocalID> marker(pes(), kInvalidLocalID);
    for (LocalID u = 0; u < _n_owned; ++u) {
      for_each_neighbor(u, [&](const LocalID v, Weight) {
        if (!is_owned(v)) {
          const PEID pe = ghost_owner(v);
          if (marker[pe] != u) {
            marker[pe] = u;
            _interface_pes.push_back(pe);
          }
        }
      });
      std::sort(_interface_pes.begin() + static_cast<std::ptrdiff_t>(_interface_xadj[u]), _interface_pes.end());
      _interface_xadj[u + 1] = _interface_pes.size();
    }
  }

  void build_ghost_adjacency() {
    _ghost_adj_xadj.assign(n_ghost() + 1, 0);
    for (LocalID u = 0; u < _n_owned; ++u) {
      for_each_neighbor(u, [&](const LocalID v, Weight) {
        if (!is_owned(v)) {
          ++_ghost_adj_xadj[v - _n_owned + 1];
        }
      });
    }
    std::partial_sum(_ghost_adj_xadj.begin(), _ghost_adj_xadj.end(), _ghost_adj_xadj.begin());
    _ghost_adj.resize(_ghost_adj_xadj.back());
    std::vector<std::uint64_t> pos(_ghost_adj_xadj.begin(), _ghost_adj_xadj.end() - 1);
    for (LocalID u = 0; u < _n_owned; ++u) {
      for_each_neighbor(u, [&](const LocalID v, Weight) {
        if (!is_owned(v)) {
          _ghost_adj[pos[v - _n_owned]++] = u;
        }
      });
    }
  }

  std::vector<GlobalID> _vtxdist{0, 0};
  int _rank = 0;
  GlobalID _first = 0;
  LocalID _n_owned = 0;

  std::vector<std::uint64_t> _xadj{0};
  std::vector<LocalID> _adjncy;
  std::vector<Weight> _adjwgt;
  std::vector<Weight> _vwgt;

  std::vector<GlobalID> _ghost_to_global;
  std::vector<PEID> _ghost_owner;
  std::unordered_map<GlobalID, LocalID> _global_to_ghost;

  std::vector<std::uint64_t> _interface_xadj{0};
  std::vector<PEID> _interface_pes;

  std::vector<std::uint64_t> _ghost_adj_xadj{0};
  std::vector<LocalID> _ghost_adj;

  Totals _totals;
};

//
// Construction from a sequential graph
//

/// Local part of `graph` for PE `rank` under distribution `vtxdist`. Needs no
/// communication since every PE knows the whole graph.
inline DistGraph build_local(const SeqGraph &graph, std::vector<GlobalID> vtxdist, const int rank) {
  expects(vtxdist.back() == graph.n(), "distribution does not match the graph");
  const auto first = static_cast<LocalID>(vtxdist[rank]);
  const auto last = static_cast<LocalID>(vtxdist[rank + 1]);

  std::vector<std::uint64_t> xadj(last - first + 1, 0);
  const std::uint64_t edge_offset = graph.first_edge(first);
  for (LocalID u = first; u < last; ++u) {
    xadj[u - first + 1] = graph.last_edge(u) - edge_offset;
  }
  const auto adj = graph.raw_adjncy().subspan(edge_offset, xadj.back());
  std::vector<GlobalID> adjncy(adj.begin(), adj.end());
  const auto wgt = graph.raw_edge_weights().subspan(edge_offset, xadj.back());
  std::vector<Weight> owned(graph.raw_vertex_weights().begin() + first, graph.raw_vertex_weights().begin() + last);

  return {
      std::move(vtxdist),
      rank,
      std::move(xadj),
      adjncy,
      std::vector<Weight>(wgt.begin(), wgt.end()),
      std::move(owned),
      [&](const GlobalID gid) { return graph.vertex_weight(static_cast<LocalID>(gid)); },
      {.m = graph.m(), .total_weight = graph.total_weight(), .max_vertex_weight = graph.max_vertex_weight()},
  };
}

/// Splits `graph` into `pes` balanced consecutive ranges.
inline std::vector<DistGraph> distribute(const SeqGraph &graph, const int pes) {
  const auto vtxdist = balanced_distribution(graph.n(), pes);
  std::vector<DistGraph> parts;
  parts.reserve(pes);
  for (int p = 0; p < pes; ++p) {
    parts.push_back(build_local(graph, vtxdist, p));
  }
  return parts;
}

//
// Ghost synchronization
//

template <typename Value> struct GhostMessage {
  LocalID local; // owned local ID on the sending PE
  Value value;
};

/// Sends get(u) for every owned interface vertex u in `owned` to all PEs that
/// hold u as a ghost; calls set(ghost, value) on the receivers.
template <typename Value, typename Get, typename Set>
void sync_ghosts(
    const DistGraph &graph, msg::PEGroup &group, std::span<const LocalID> owned, Get &&get, Set &&set
) {
  std::vector<std::vector<GhostMessage<Value>>> out(group.size());
  for (const LocalID u : owned) {
    for (const PEID pe : graph.interface_pes(u)) {
      out[pe].push_back({u, get(u)});
    }
  }
  const auto in = msg::sparse_all_to_all(group, out);
  for (int pe = 0; pe < group.size(); ++pe) {
    for (const auto &[local, value] : in[pe]) {
      const LocalID ghost = graph.global_to_local(graph.vtxdist()[pe] + local);
      set(ghost, value);
    }
  }
}

/// Full synchronization over all interface vertices.
template <typename Value, typename Get, typename Set>
void sync_all_ghosts(const DistGraph &graph, msg::PEGroup &group, Get &&get, Set &&set) {
  std::vector<LocalID> interface;
  for (LocalID u = 0; u < graph.n_owned(); ++u) {
    if (graph.is_interface(u)) {
      interface.push_back(u);
    }
  }
  sync_ghosts<Value>(graph, group, interface, get, set);
}

/// Collective construction from owned adjacency in global IDs: fetches ghost
/// weights from their owners and computes global totals.
inline DistGraph build_dist_graph(
    msg::PEGroup &group,
    std::vector<GlobalID> vtxdist,
    std::vector<std::uint64_t> xadj,
    std::span<const GlobalID> adjncy_global,
    std::vector<Weight> adjwgt,
    std::vector<Weight> owned_weights
) {
  struct LocalTotals {
    std::int64_t directed_edges;
    Weight total_weight;
  };
  const Weight local_weight = std::accumulate(owned_weights.begin(), owned_weights.end(), Weight{0});
  const Weight local_max =
      owned_weights.empty() ? 0 : *std::max_element(owned_weights.begin(), owned_weights.end());
  const std::array<Weight, 2> local_sums{static_cast<Weight>(adjncy_global.size()), local_weight};
  const auto sums = msg::allreduce_sum<Weight>(group, local_sums);
  const Weight max_weight = msg::allreduce_max<Weight>(group, local_max);

  DistGraph graph(
      std::move(vtxdist),
      group.rank(),
      std::move(xadj),
      adjncy_global,
      std::move(adjwgt),
      std::move(owned_weights),
      [](GlobalID) { return Weight{0}; },
      {.m = static_cast<std::uint64_t>(sums[0] / 2), .total_weight = sums[1], .max_vertex_weight = max_weight}
  );

  std::vector<Weight> ghost_weights(graph.n_ghost(), 0);
  sync_all_ghosts<Weight>(
      graph,
      group,
      [&](const LocalID u) { return graph.vertex_weight(u); },
      [&](const LocalID ghost, const Weight w) { ghost_weights[ghost - graph.n_owned()] = w; }
  );
  graph.set_ghost_weights(ghost_weights);
  return graph;
}

//
// Gathering and cut computation
//

/// Replicates the whole graph on every member of `group`, preserving global
/// vertex order.
inline SeqGraph gather(const DistGraph &graph, msg::PEGroup &group) {
  struct VertexRecord {
    Weight weight;
    std::uint64_t degree;
  };
  struct EdgeRecord {
    GlobalID target;
    Weight weight;
  };

  std::vector<VertexRecord> vertices(graph.n_owned());
  std::vector<EdgeRecord> edges;
  edges.reserve(graph.local_directed_edges());
  for (LocalID u = 0; u < graph.n_owned(); ++u) {
    vertices[u] = {graph.vertex_weight(u), graph.degree(u)};
    graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) {
      edges.push_back({graph.local_to_global(v), w});
    });
  }

  const auto all_vertices = msg::allgatherv<VertexRecord>(group, vertices);
  const auto all_edges = msg::allgatherv<EdgeRecord>(group, edges);
  expects(all_vertices.size() < kInvalidLocalID, "gathered graph too large for 32 bit local IDs");

  std::vector<std::uint64_t> xadj(all_vertices.size() + 1, 0);
  std::vector<Weight> vwgt(all_vertices.size());
  for (std::size_t u = 0; u < all_vertices.size(); ++u) {
    xadj[u + 1] = xadj[u] + all_vertices[u].degree;
    vwgt[u] = all_vertices[u].weight;
  }
  std::vector<LocalID> adjncy(all_edges.size());
  std::vector<Weight> adjwgt(all_edges.size());
  for (std::size_t e = 0; e < all_edges.size(); ++e) {
    adjncy[e] = static_cast<LocalID>(all_edges[e].target);
    adjwgt[e] = all_edges[e].weight;
  }
  return {std::move(xadj), std::move(adjncy), std::move(vwgt), std::move(adjwgt)};
}

/// True on all members iff every ghost label equals its owner's label.
inline bool ghost_labels_synchronized(
    const DistGraph &graph, msg::PEGroup &group, std::span<const BlockID> labels
) {
  bool consistent = true;
  sync_all_ghosts<BlockID>(
      graph,
      group,
      [&](const LocalID u) { return labels[u]; },
      [&](const LocalID ghost, const BlockID owner_label) { consistent &= labels[ghost] == owner_label; }
  );
  return !msg::allreduce_or(group, !consistent);
}

/// Global cut weight. Each undirected edge is counted by the endpoint with the
/// smaller global ID. Labels must cover owned and ghost vertices.
inline Weight edge_cut(
    const DistGraph &graph, msg::PEGroup &group, std::span<const BlockID> labels, const bool verify_ghosts = false
) {
  expects(labels.size() == graph.n_total(), "labels must cover owned and ghost vertices");
  bool unassigned = false;
  Weight local_cut = 0;
  for (LocalID u = 0; u < graph.n_owned(); ++u) {
    unassigned |= labels[u] == kInvalidBlockID;
    const GlobalID gu = graph.local_to_global(u);
    graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) {
      if (gu < graph.local_to_global(v) && labels[u] != labels[v]) {
        local_cut += w;
      }
    });
  }
  expects(!msg::allreduce_or(group, unassigned), "edge_cut: unassigned vertex");
  if (verify_ghosts) {
    expects(ghost_labels_synchronized(graph, group, labels), "edge_cut: ghost labels are out of sync");
  }
  return msg::allreduce_sum<Weight>(group, local_cut);
}

} // namespace dkmp
