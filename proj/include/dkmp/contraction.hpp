/*******************************************************************************
 * Cluster contraction.
 *
 * Nonempty clusters are announced to the PE owning their initial vertex.
 * Each PE keeps at most ceil(delta * n_C / P) of its clusters; the rest go to
 * the PEs with the fewest clusters. Coarse IDs are consecutive per PE, kept
 * clusters first. Edges are aggregated locally, shipped to the owner of the
 * coarse source vertex and merged there.
 *
 * @file:   contraction.hpp
 ******************************************************************************/
#pragma once

#include <queue>
#include <unordered_map>

#include "dkmp/lp_clustering.hpp"
#include "dkmp/partition.hpp"

namespace dkmp {

struct CoarseningLevel {
  DistGraph coarse;
  /// Coarse global ID of every owned fine vertex.
  std::vector<GlobalID> projection;
};

/// Number of clusters each PE ends up with, given how many each PE owns.
/// Returns {kept per PE, final count per PE, destination of each surplus
/// cluster in source-PE order}.
struct ClusterMapping {
  std::vector<GlobalID> kept;
  std::vector<GlobalID> final_counts;
  std::vector<int> surplus_destination;
};

inline ClusterMapping map_clusters(std::span<const GlobalID> owned_clusters, const double delta) {
  const auto pes = static_cast<GlobalID>(owned_clusters.size());
  GlobalID n_c = 0;
  for (const GlobalID c : owned_clusters) {
    n_c += c;
  }
  const GlobalID quota = static_cast<GlobalID>(
      detail::ceil_div(static_cast<__int128>(epsilon_to_ppm(delta)) * n_c, static_cast<__int128>(pes) * kEpsilonScale)
  );

  ClusterMapping mapping;
  mapping.kept.resize(pes);
  for (GlobalID p = 0; p < pes; ++p) {
    mapping.kept[p] = std::min(owned_clusters[p], quota);
  }
  mapping.final_counts = mapping.kept;

  using Load = std::pair<GlobalID, int>;
  std::priority_queue<Load, std::vector<Load>, std::greater<>> least_loaded;
  for (GlobalID p = 0; p < pes; ++p) {
    least_loaded.emplace(mapping.kept[p], static_cast<int>(p));
  }
  for (GlobalID p = 0; p < pes; ++p) {
    for (GlobalID i = mapping.kept[p]; i < owned_clusters[p]; ++i) {
      auto [load, target] = least_loaded.top();
      least_loaded.pop();
      mapping.surplus_destination.push_back(target);
      ++mapping.final_counts[target];
      least_loaded.emplace(load + 1, target);
    }
  }
  return mapping;
}

namespace detail {

struct CoarseIdReply {
  GlobalID cluster;
  GlobalID coarse;
};

struct CoarseEdge {
  GlobalID source;
  GlobalID target;
  Weight weight;
};

struct CoarseVertexWeight {
  GlobalID vertex;
  Weight weight;
};

/// Sorts by (source, target) and merges duplicates.
inline void merge_edges(std::vector<CoarseEdge> &edges) {
  std::sort(edges.begin(), edges.end(), [](const CoarseEdge &a, const CoarseEdge &b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  });
  std::size_t out = 0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (out > 0 && edges[out - 1].source == edges[i].source && edges[out - 1].target == edges[i].target) {
      edges[out - 1].weight += edges[i].weight;
    } else {
      edges[out++] = edges[i];
    }
  }
  edges.resize(out);
}

} // namespace detail

inline CoarseningLevel
contract(const DistGraph &graph, const Clustering &clustering, msg::PEGroup &group, const double delta = 1.1) {
  const int pes = group.size();
  const auto &labels = clustering.labels;

  // Announce every nonempty cluster to its owner.
  std::vector<std::vector<GlobalID>> announce(pes);
  {
    std::vector<GlobalID> distinct(labels.begin(), labels.begin() + graph.n_owned());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (const GlobalID c : distinct) {
      announce[owner_of(graph.vtxdist(), c)].push_back(c);
    }
  }
  const auto announced = msg::sparse_all_to_all(group, announce);

  std::vector<GlobalID> my_clusters;
  for (const auto &list : announced) {
    my_clusters.insert(my_clusters.end(), list.begin(), list.end());
  }
  std::sort(my_clusters.begin(), my_clusters.end());
  my_clusters.erase(std::unique(my_clusters.begin(), my_clusters.end()), my_clusters.end());

  const auto counts = msg::allgather_one<GlobalID>(group, my_clusters.size());
  const ClusterMapping mapping = map_clusters(counts, delta);

  std::vector<GlobalID> coarse_vtxdist(pes + 1, 0);
  for (int p = 0; p < pes; ++p) {
    coarse_vtxdist[p + 1] = coarse_vtxdist[p] + mapping.final_counts[p];
  }

  // Coarse IDs of my clusters: kept ones first on my PE, surplus appended to
  // their destination after its kept clusters in source-PE order.
  std::unordered_map<GlobalID, GlobalID> coarse_of;
  coarse_of.reserve(my_clusters.size());
  {
    const int rank = group.rank();
    std::vector<GlobalID> next(pes);
    for (int p = 0; p < pes; ++p) {
      next[p] = coarse_vtxdist[p] + mapping.kept[p];
    }
    std::size_t surplus_index = 0;
    for (int p = 0; p < pes; ++p) {
      const GlobalID surplus = counts[p] - mapping.kept[p];
      for (GlobalID i = 0; i < surplus; ++i, ++surplus_index) {
        const int dest = mapping.surplus_destination[surplus_index];
        const GlobalID id = next[dest]++;
        if (p == rank) {
          coarse_of[my_clusters[mapping.kept[p] + i]] = id;
        }
      }
    }
    for (GlobalID i = 0; i < mapping.kept[rank]; ++i) {
      coarse_of[my_clusters[i]] = coarse_vtxdist[rank] + i;
    }
  }

  std::vector<std::vector<detail::CoarseIdReply>> replies(pes);
  for (int pe = 0; pe < pes; ++pe) {
    for (const GlobalID c : announced[pe]) {
      replies[pe].push_back({c, coarse_of[c]});
    }
  }
  const auto answers = msg::sparse_all_to_all(group, replies);
  std::unordered_map<GlobalID, GlobalID> coarse_id;
  for (const auto &list : answers) {
    for (const auto &[c, id] : list) {
      coarse_id.emplace(c, id);
    }
  }

  std::vector<GlobalID> coarse_label(graph.n_total(), kInvalidGlobalID);
  for (LocalID u = 0; u < graph.n_owned(); ++u) {
    coarse_label[u] = coarse_id.at(labels[u]);
  }
  sync_all_ghosts<GlobalID>(
      graph,
      group,
      [&](const LocalID u) { return coarse_label[u]; },
      [&](const LocalID ghost, const GlobalID id) { coarse_label[ghost] = id; }
  );

  // Local pre-contraction.
  std::vector<detail::CoarseVertexWeight> vertex_weights;
  std::vector<detail::CoarseEdge> edges;
  for (LocalID u = 0; u < graph.n_owned(); ++u) {
    const GlobalID cu = coarse_label[u];
    vertex_weights.push_back({cu, graph.vertex_weight(u)});
    graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) {
      const GlobalID cv = coarse_label[v];
      if (cu != cv) {
        edges.push_back({cu, cv, w});
      }
    });
  }
  detail::merge_edges(edges);

  std::vector<std::vector<detail::CoarseVertexWeight>> weight_out(pes);
  {
    std::sort(vertex_weights.begin(), vertex_weights.end(), [](const auto &a, const auto &b) {
      return a.vertex < b.vertex;
    });
    for (std::size_t i = 0; i < vertex_weights.size();) {
      detail::CoarseVertexWeight acc = vertex_weights[i++];
      while (i < vertex_weights.size() && vertex_weights[i].vertex == acc.vertex) {
        acc.weight += vertex_weights[i++].weight;
      }
      weight_out[owner_of(coarse_vtxdist, acc.vertex)].push_back(acc);
    }
  }
  std::vector<std::vector<detail::CoarseEdge>> edge_out(pes);
  for (const auto &e : edges) {
    edge_out[owner_of(coarse_vtxdist, e.source)].push_back(e);
  }
  const auto weight_in = msg::sparse_all_to_all(group, weight_out);
  const auto edge_in = msg::sparse_all_to_all(group, edge_out);

  const GlobalID first = coarse_vtxdist[group.rank()];
  const auto n_local = static_cast<LocalID>(coarse_vtxdist[group.rank() + 1] - first);
  std::vector<Weight> coarse_weights(n_local, 0);
  for (const auto &list : weight_in) {
    for (const auto &[v, w] : list) {
      coarse_weights[v - first] += w;
    }
  }
  std::vector<detail::CoarseEdge> received;
  for (const auto &list : edge_in) {
    received.insert(received.end(), list.begin(), list.end());
  }
  detail::merge_edges(received);

  std::vector<std::uint64_t> xadj(n_local + 1, 0);
  std::vector<GlobalID> adjncy(received.size());
  std::vector<Weight> adjwgt(received.size());
  for (std::size_t e = 0; e < received.size(); ++e) {
    ++xadj[received[e].source - first + 1];
    adjncy[e] = received[e].target;
    adjwgt[e] = received[e].weight;
  }
  for (LocalID u = 0; u < n_local; ++u) {
    xadj[u + 1] += xadj[u];
  }

  CoarseningLevel level;
  level.coarse = build_dist_graph(
      group, std::move(coarse_vtxdist), std::move(xadj), adjncy, std::move(adjwgt), std::move(coarse_weights)
  );
  level.projection.assign(coarse_label.begin(), coarse_label.begin() + graph.n_owned());
  return level;
}

/// Fine labels from coarse labels: part(v) = coarse_part(projection(v)).
/// Ghost labels of the result are synchronized.
inline std::vector<BlockID> project_labels(
    const DistGraph &fine,
    const CoarseningLevel &level,
    std::span<const BlockID> coarse_blocks,
    msg::PEGroup &group
) {
  const DistGraph &coarse = level.coarse;
  const int pes = group.size();

  std::vector<std::vector<GlobalID>> requests(pes);
  {
    std::vector<GlobalID> needed;
    for (LocalID u = 0; u < fine.n_owned(); ++u) {
      if (!coarse.is_owned_global(level.projection[u])) {
        needed.push_back(level.projection[u]);
      }
    }
    std::sort(needed.begin(), needed.end());
    needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
    for (const GlobalID c : needed) {
      requests[owner_of(coarse.vtxdist(), c)].push_back(c);
    }
  }
  const auto asked = msg::sparse_all_to_all(group, requests);
  std::vector<std::vector<BlockID>> answers(pes);
  for (int pe = 0; pe < pes; ++pe) {
    for (const GlobalID c : asked[pe]) {
      answers[pe].push_back(coarse_blocks[c - coarse.offset()]);
    }
  }
  const auto answered = msg::sparse_all_to_all(group, answers);
  std::unordered_map<GlobalID, BlockID> remote;
  for (int pe = 0; pe < pes; ++pe) {
    for (std::size_t i = 0; i < requests[pe].size(); ++i) {
      remote.emplace(requests[pe][i], answered[pe][i]);
    }
  }

  std::vector<BlockID> blocks(fine.n_total(), kInvalidBlockID);
  for (LocalID u = 0; u < fine.n_owned(); ++u) {
    const GlobalID c = level.projection[u];
    blocks[u] = coarse.is_owned_global(c) ? coarse_blocks[c - coarse.offset()] : remote.at(c);
  }
  sync_block_labels(fine, group, blocks);
  return blocks;
}

inline Partition project_partition(
    const DistGraph &fine, const CoarseningLevel &level, const Partition &coarse_part, msg::PEGroup &group
) {
  Partition p;
  p.k = coarse_part.k;
  p.blocks = project_labels(fine, level, coarse_part.blocks, group);
  p.block_weights = coarse_part.block_weights;
  p.max_block_weights = coarse_part.max_block_weights;
  return p;
}

} // namespace dkmp
