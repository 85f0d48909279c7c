/*******************************************************************************
 * Quality metrics of a partition, computed from scratch on the whole graph.
 *
 * @file:   metrics.hpp
 ******************************************************************************/
#pragma once

#include <set>

#include "dkmp/seq_graph.hpp"

namespace dkmp {

struct PartitionMetrics {
  Weight cut = 0;
  /// max_i c(V_i) * k / c(V) - 1
  double imbalance = 0.0;
  Weight max_block_weight = 0;
  Weight bound = 0;
  BlockID nonempty_blocks = 0;
  bool feasible = false;
  /// Empty if the labels are well-formed.
  std::string error;
};

/// Checks labels against graph and k, then evaluates cut and balance with
/// L_max = max{(1 + eps) c(V) / k, c(V) / k + max c(v)}.
inline PartitionMetrics evaluate_partition(
    const SeqGraph &graph, std::span<const BlockID> blocks, const BlockID k, const double eps
) {
  PartitionMetrics metrics;
  if (k == 0) {
    metrics.error = "k must be at least 1";
    return metrics;
  }
  if (blocks.size() != graph.n()) {
    metrics.error = "partition has " + std::to_string(blocks.size()) + " entries, graph has " +
                    std::to_string(graph.n()) + " vertices";
    return metrics;
  }
  for (LocalID u = 0; u < graph.n(); ++u) {
    if (blocks[u] >= k) {
      metrics.error = "vertex " + std::to_string(u + 1) + " has block " + std::to_string(blocks[u]) +
                      ", expected less than " + std::to_string(k);
      return metrics;
    }
  }

  const auto weights = block_weights(graph, blocks, k);
  metrics.cut = edge_cut(graph, blocks);
  metrics.imbalance = max_imbalance(weights, graph.total_weight());
  metrics.max_block_weight = *std::max_element(weights.begin(), weights.end());
  metrics.bound = l_max(graph.total_weight(), k, eps, graph.max_vertex_weight());
  metrics.nonempty_blocks = static_cast<BlockID>(std::set<BlockID>(blocks.begin(), blocks.end()).size());
  metrics.feasible = metrics.max_block_weight <= metrics.bound;
  return metrics;
}

} // namespace dkmp
