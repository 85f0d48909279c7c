/*******************************************************************************
 * Distributed k-way partition state.
 *
 * Labels cover owned and ghost vertices. Block weights and per-block weight
 * bounds are replicated on every PE of the group.
 *
 * @file:   partition.hpp
 ******************************************************************************/
#pragma once

#include <algorithm>
#include <vector>

#include "dkmp/dist_graph.hpp"
#include "dkmp/msg/group.hpp"

namespace dkmp {

struct Partition {
  BlockID k = 0;
  std::vector<BlockID> blocks;
  std::vector<Weight> block_weights;
  std::vector<Weight> max_block_weights;

  [[nodiscard]] BlockID block(const LocalID u) const {
    return blocks[u];
  }

  [[nodiscard]] Weight overload(const BlockID b) const {
    return std::max<Weight>(0, block_weights[b] - max_block_weights[b]);
  }

  [[nodiscard]] Weight total_overload() const {
    Weight total = 0;
    for (BlockID b = 0; b < k; ++b) {
      total += overload(b);
    }
    return total;
  }

  [[nodiscard]] bool feasible() const {
    for (BlockID b = 0; b < k; ++b) {
      if (block_weights[b] > max_block_weights[b]) {
        return false;
      }
    }
    return true;
  }
};

/// Owned block weights summed over the group.
inline std::vector<Weight>
compute_block_weights(const DistGraph &graph, msg::PEGroup &group, std::span<const BlockID> blocks, const BlockID k) {
  std::vector<Weight> local(k, 0);
  bool unassigned = false;
  for (LocalID u = 0; u < graph.n_owned(); ++u) {
    if (blocks[u] >= k) {
      unassigned = true;
      continue;
    }
    local[blocks[u]] += graph.vertex_weight(u);
  }
  expects(!msg::allreduce_or(group, unassigned), "block label out of range");
  return msg::allreduce_sum<Weight>(group, local);
}

/// Builds a partition from labels over owned and ghost vertices.
inline Partition make_partition(
    const DistGraph &graph,
    msg::PEGroup &group,
    std::vector<BlockID> blocks,
    std::vector<Weight> max_block_weights
) {
  expects(blocks.size() == graph.n_total(), "labels must cover owned and ghost vertices");
  Partition p;
  p.k = static_cast<BlockID>(max_block_weights.size());
  p.blocks = std::move(blocks);
  p.block_weights = compute_block_weights(graph, group, p.blocks, p.k);
  p.max_block_weights = std::move(max_block_weights);
  return p;
}

/// Uniform bound L_max for all k blocks.
inline std::vector<Weight> uniform_max_block_weights(const DistGraph &graph, const BlockID k, const double eps) {
  return std::vector<Weight>(k, l_max(graph.total_weight(), k, eps, graph.max_vertex_weight()));
}

/// Pushes owned labels to all ghost copies.
inline void sync_block_labels(const DistGraph &graph, msg::PEGroup &group, std::vector<BlockID> &blocks) {
  sync_all_ghosts<BlockID>(
      graph,
      group,
      [&](const LocalID u) { return blocks[u]; },
      [&](const LocalID ghost, const BlockID b) { blocks[ghost] = b; }
  );
}

} // namespace dkmp
