/*******************************************************************************
 * Size-constrained label propagation refinement of a distributed partition.
 *
 * Vertices are visited in the clustering order (degree buckets, shuffled
 * chunks) and split into the same number of batches. Within a batch a PE sees
 * its own moves immediately and remote moves only after the batch, when block
 * weight deltas are summed over the group and ghost labels are refreshed.
 *
 * @file:   lp_refinement.hpp
 ******************************************************************************/
#pragma once

#include "dkmp/chunk_schedule.hpp"
#include "dkmp/partition.hpp"
#include "dkmp/rating_map.hpp"

namespace dkmp {

struct RefinementConfig {
  int iterations = 3;
  std::size_t alpha = 8;
  std::size_t beta = 128;
  LocalID chunk_size = kDefaultChunkSize;
  /// Records the global cut after every iteration (one extra collective).
  bool track_cut = false;
};

struct RefinementStats {
  std::uint64_t moves = 0;
  std::vector<Weight> cuts;
};

namespace detail {

struct BlockDelta {
  BlockID block;
  Weight delta;
};

/// Adds the group-wide sum of the sparse deltas to `weights`, clearing `delta`.
inline void apply_block_deltas(msg::PEGroup &group, std::vector<Weight> &delta, std::vector<Weight> &weights) {
  std::vector<BlockDelta> nonzero;
  for (BlockID b = 0; b < delta.size(); ++b) {
    if (delta[b] != 0) {
      nonzero.push_back({b, delta[b]});
      delta[b] = 0;
    }
  }
  if (group.size() == 1) {
    for (const auto &[b, d] : nonzero) {
      weights[b] += d;
    }
    return;
  }
  for (const auto &[b, d] : msg::allgatherv<BlockDelta>(group, nonzero)) {
    weights[b] += d;
  }
}

} // namespace detail

inline RefinementStats refine(
    const DistGraph &graph,
    Partition &partition,
    msg::PEGroup &group,
    const RefinementConfig &config,
    const std::uint64_t seed
) {
  RefinementStats stats;
  const std::size_t batches = batch_count(group.size(), config.alpha, config.beta);
  auto &blocks = partition.blocks;
  auto &weights = partition.block_weights;
  const auto &max_weights = partition.max_block_weights;
  std::vector<Weight> delta(partition.k, 0);
  RatingMap<BlockID> ratings;
  std::vector<LocalID> moved_interface;

  for (int iteration = 0; iteration < config.iterations; ++iteration) {
    const std::uint64_t iteration_seed =
        mix_seed(seed, {static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(group.rank())});
    const ChunkSchedule schedule(graph, config.chunk_size, iteration_seed);
    Random rng(iteration_seed ^ 0x5bd1e995ULL);

    for (std::size_t batch = 0; batch < batches; ++batch) {
      const auto [begin, end] = schedule.batch(batch, batches);
      moved_interface.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const LocalID u = schedule.order()[i];
        const BlockID from = blocks[u];
        const Weight wu = graph.vertex_weight(u);
        const Weight from_weight = weights[from] + delta[from];
        if (from_weight <= wu) {
          continue; // never empty a block
        }
        ratings.reset(graph.degree(u));
        graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) { ratings.add(blocks[v], w); });
        const Weight own = ratings.get(from);

        BlockID best = from;
        Weight best_rating = own;
        Weight best_weight = 0;
        ratings.for_each([&](const BlockID b, const Weight rating) {
          if (b == from || rating < own || rating < best_rating) {
            return;
          }
          const Weight projected = weights[b] + delta[b];
          if (projected + wu > max_weights[b]) {
            return;
          }
          if (rating == own && projected + wu >= from_weight) {
            return; // equal gain only towards a lighter block
          }
          if (best == from || rating > best_rating || projected < best_weight ||
              (projected == best_weight && rng.coin())) {
            best = b;
            best_rating = rating;
            best_weight = projected;
          }
        });

        if (best != from) {
          blocks[u] = best;
          delta[from] -= wu;
          delta[best] += wu;
          ++stats.moves;
          if (graph.is_interface(u)) {
            moved_interface.push_back(u);
          }
        }
      }

      detail::apply_block_deltas(group, delta, weights);
      sync_ghosts<BlockID>(
          graph,
          group,
          moved_interface,
          [&](const LocalID u) { return blocks[u]; },
          [&](const LocalID ghost, const BlockID b) { blocks[ghost] = b; }
      );
    }

    if (config.track_cut) {
      stats.cuts.push_back(edge_cut(graph, group, blocks));
    }
  }
  return stats;
}

} // namespace dkmp
