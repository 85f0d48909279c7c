/*******************************************************************************
 * Sequential partitioner used for the coarsest graph and for block-induced
 * subgraphs: multilevel recursive bisection with label propagation
 * coarsening, greedy graph growing and label propagation refinement.
 *
 * A k-way call takes a list of final block counts, one per part, so that
 * parts can be destined for different numbers of final blocks. Part i
 * receives the share counts[i] / sum(counts) of the weight.
 *
 * @file:   initial_partition.hpp
 ******************************************************************************/
#pragma once

#include <cmath>
#include <numeric>
#include <queue>

#include "dkmp/dist_graph.hpp"
#include "dkmp/partition.hpp"
#include "dkmp/random.hpp"
#include "dkmp/rating_map.hpp"
#include "dkmp/rel_gain.hpp"

namespace dkmp {

struct InitialPartitionConfig {
  int attempts = 4;
  int coarsening_iterations = 5;
  int refinement_iterations = 16;
  LocalID coarsening_limit = 128;
};

struct SeqPartitionResult {
  std::vector<BlockID> blocks;
  std::vector<Weight> block_weights;
  Weight cut = 0;
  bool feasible = true;
  /// Largest amount by which a part exceeds its bound.
  Weight max_overload = 0;
};

namespace seq {

struct Subgraph {
  SeqGraph graph;
  std::vector<LocalID> to_parent;
};

/// Subgraph induced by the vertices of block `b`.
inline Subgraph extract_block(const SeqGraph &graph, std::span<const BlockID> blocks, const BlockID b) {
  Subgraph sub;
  std::vector<LocalID> local(graph.n(), kInvalidLocalID);
  for (LocalID u = 0; u < graph.n(); ++u) {
    if (blocks[u] == b) {
      local[u] = static_cast<LocalID>(sub.to_parent.size());
      sub.to_parent.push_back(u);
    }
  }
  std::vector<std::uint64_t> xadj(sub.to_parent.size() + 1, 0);
  std::vector<LocalID> adjncy;
  std::vector<Weight> vwgt(sub.to_parent.size());
  std::vector<Weight> adjwgt;
  for (LocalID i = 0; i < sub.to_parent.size(); ++i) {
    const LocalID u = sub.to_parent[i];
    vwgt[i] = graph.vertex_weight(u);
    graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) {
      if (blocks[v] == b) {
        adjncy.push_back(local[v]);
        adjwgt.push_back(w);
      }
    });
    xadj[i + 1] = adjncy.size();
  }
  sub.graph = SeqGraph(std::move(xadj), std::move(adjncy), std::move(vwgt), std::move(adjwgt));
  return sub;
}

inline std::vector<LocalID> random_order(const LocalID n, Random &rng) {
  std::vector<LocalID> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  return order;
}

/// Size-constrained label propagation; returns cluster labels in 0..n-1.
inline std::vector<LocalID>
lp_cluster(const SeqGraph &graph, const Weight max_weight, const int iterations, Random &rng) {
  const LocalID n = graph.n();
  std::vector<LocalID> labels(n);
  std::iota(labels.begin(), labels.end(), 0);
  std::vector<Weight> weights(graph.raw_vertex_weights().begin(), graph.raw_vertex_weights().end());
  RatingMap<LocalID> ratings;

  for (int iteration = 0; iteration < iterations; ++iteration) {
    std::size_t moved = 0;
    for (const LocalID u : random_order(n, rng)) {
      const LocalID current = labels[u];
      const Weight wu = graph.vertex_weight(u);
      ratings.reset(graph.degree(u));
      graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) { ratings.add(labels[v], w); });
      const Weight current_rating = ratings.get(current);
      LocalID best = current;
      Weight best_rating = current_rating;
      ratings.for_each([&](const LocalID c, const Weight rating) {
        if (c == current || rating <= current_rating || rating < best_rating || weights[c] + wu > max_weight) {
          return;
        }
        if (best == current || rating > best_rating || weights[c] < weights[best] ||
            (weights[c] == weights[best] && c < best)) {
          best = c;
          best_rating = rating;
        }
      });
      if (best != current) {
        labels[u] = best;
        weights[current] -= wu;
        weights[best] += wu;
        ++moved;
      }
    }
    if (moved == 0) {
      break;
    }
  }
  return labels;
}

struct Contraction {
  SeqGraph coarse;
  std::vector<LocalID> mapping;
};

inline Contraction contract(const SeqGraph &graph, std::span<const LocalID> labels) {
  const LocalID n = graph.n();
  Contraction result;
  result.mapping.assign(n, kInvalidLocalID);
  std::vector<LocalID> coarse_of_label(n, kInvalidLocalID);
  LocalID n_c = 0;
  for (LocalID u = 0; u < n; ++u) {
    if (coarse_of_label[labels[u]] == kInvalidLocalID) {
      coarse_of_label[labels[u]] = n_c++;
    }
    result.mapping[u] = coarse_of_label[labels[u]];
  }

  std::vector<LocalID> member_start(n_c + 1, 0);
  for (LocalID u = 0; u < n; ++u) {
    ++member_start[result.mapping[u] + 1];
  }
  std::partial_sum(member_start.begin(), member_start.end(), member_start.begin());
  std::vector<LocalID> members(n);
  {
    std::vector<LocalID> pos(member_start.begin(), member_start.end() - 1);
    for (LocalID u = 0; u < n; ++u) {
      members[pos[result.mapping[u]]++] = u;
    }
  }

  std::vector<std::uint64_t> xadj(n_c + 1, 0);
  std::vector<LocalID> adjncy;
  std::vector<Weight> vwgt(n_c, 0);
  std::vector<Weight> adjwgt;
  RatingMap<LocalID> edges;
  for (LocalID c = 0; c < n_c; ++c) {
    std::size_t degree = 0;
    for (LocalID i = member_start[c]; i < member_start[c + 1]; ++i) {
      degree += graph.degree(members[i]);
    }
    edges.reset(degree);
    for (LocalID i = member_start[c]; i < member_start[c + 1]; ++i) {
      const LocalID u = members[i];
      vwgt[c] += graph.vertex_weight(u);
      graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) {
        const LocalID d = result.mapping[v];
        if (d != c) {
          edges.add(d, w);
        }
      });
    }
    edges.for_each([&](const LocalID d, const Weight w) {
      adjncy.push_back(d);
      adjwgt.push_back(w);
    });
    xadj[c + 1] = adjncy.size();
  }
  result.coarse = SeqGraph(std::move(xadj), std::move(adjncy), std::move(vwgt), std::move(adjwgt));
  return result;
}

inline std::vector<Weight> weights_of(const SeqGraph &graph, std::span<const BlockID> blocks, const BlockID k) {
  return block_weights(graph, blocks, k);
}

/// k-way label propagation refinement. A vertex moves to the adjacent block
/// with the highest connection if that strictly improves its connection, or
/// keeps it equal while moving to a block that stays lighter than the
/// source. Moves never exceed a bound and never empty a block.
inline void refine(
    const SeqGraph &graph,
    std::vector<BlockID> &blocks,
    std::vector<Weight> &weights,
    std::span<const Weight> max_weights,
    const int iterations,
    Random &rng
) {
  RatingMap<BlockID> ratings;
  for (int iteration = 0; iteration < iterations; ++iteration) {
    std::size_t moved = 0;
    for (const LocalID u : random_order(graph.n(), rng)) {
      const BlockID from = blocks[u];
      const Weight wu = graph.vertex_weight(u);
      if (weights[from] == wu) {
        continue;
      }
      ratings.reset(graph.degree(u));
      graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) { ratings.add(blocks[v], w); });
      const Weight own = ratings.get(from);
      BlockID best = from;
      Weight best_rating = own;
      ratings.for_each([&](const BlockID b, const Weight rating) {
        if (b == from || rating < own || weights[b] + wu > max_weights[b]) {
          return;
        }
        if (rating == own && weights[b] + wu >= weights[from]) {
          return;
        }
        if (best == from || rating > best_rating ||
            (rating == best_rating && (weights[b] < weights[best] || (weights[b] == weights[best] && rng.coin())))) {
          best = b;
          best_rating = rating;
        }
      });
      if (best != from) {
        blocks[u] = best;
        weights[from] -= wu;
        weights[best] += wu;
        ++moved;
      }
    }
    if (moved == 0) {
      break;
    }
  }
}

/// Greedy repair of overloaded blocks: vertices leave an overloaded block in
/// order of relative gain towards the best block that can take them.
inline void rebalance(
    const SeqGraph &graph, std::vector<BlockID> &blocks, std::vector<Weight> &weights, std::span<const Weight> max_weights
) {
  const auto k = static_cast<BlockID>(weights.size());
  RatingMap<BlockID> ratings;
  struct Candidate {
    RelGain key;
    LocalID u;
    BlockID target;
  };

  for (int pass = 0; pass < 64; ++pass) {
    bool overloaded = false;
    for (BlockID b = 0; b < k; ++b) {
      overloaded |= weights[b] > max_weights[b];
    }
    if (!overloaded) {
      return;
    }

    std::vector<Candidate> candidates;
    for (LocalID u = 0; u < graph.n(); ++u) {
      const BlockID from = blocks[u];
      const Weight wu = graph.vertex_weight(u);
      if (weights[from] <= max_weights[from]) {
        continue;
      }
      ratings.reset(graph.degree(u));
      graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) { ratings.add(blocks[v], w); });
      BlockID target = kInvalidBlockID;
      Weight target_rating = 0;
      ratings.for_each([&](const BlockID b, const Weight rating) {
        if (b == from || weights[b] + wu > max_weights[b]) {
          return;
        }
        if (target == kInvalidBlockID || rating > target_rating ||
            (rating == target_rating && weights[b] < weights[target])) {
          target = b;
          target_rating = rating;
        }
      });
      if (target == kInvalidBlockID) {
        for (BlockID b = 0; b < k; ++b) {
          if (b != from && weights[b] + wu <= max_weights[b] &&
              (target == kInvalidBlockID || weights[b] < weights[target])) {
            target = b;
          }
        }
      }
      if (target != kInvalidBlockID) {
        candidates.push_back({rel_gain(target_rating - ratings.get(from), wu), u, target});
      }
    }
    if (candidates.empty()) {
      return;
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate &a, const Candidate &b) {
      return a.key != b.key ? a.key > b.key : a.u < b.u;
    });

    bool progress = false;
    for (const auto &[key, u, target] : candidates) {
      const BlockID from = blocks[u];
      const Weight wu = graph.vertex_weight(u);
      if (weights[from] <= max_weights[from] || weights[target] + wu > max_weights[target]) {
        continue;
      }
      blocks[u] = target;
      weights[from] -= wu;
      weights[target] += wu;
      progress = true;
    }
    if (!progress) {
      return;
    }
  }
}

/// Vertex farthest from `start` by BFS hops, restricted to its component.
inline LocalID farthest_vertex(const SeqGraph &graph, const LocalID start) {
  std::vector<bool> seen(graph.n(), false);
  std::vector<LocalID> queue{start};
  seen[start] = true;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    graph.for_each_neighbor(queue[head], [&](const LocalID v, Weight) {
      if (!seen[v]) {
        seen[v] = true;
        queue.push_back(v);
      }
    });
  }
  return queue.back();
}

/// Grows block 0 from a pseudo-peripheral vertex until it reaches
/// `target0`, always adding the vertex with the highest gain that fits.
inline std::vector<BlockID>
grow_bisection(const SeqGraph &graph, const Weight target0, const Weight max0, Random &rng) {
  const LocalID n = graph.n();
  std::vector<BlockID> blocks(n, 1);
  if (n == 0) {
    return blocks;
  }
  std::vector<Weight> gain(n, 0);
  for (LocalID u = 0; u < n; ++u) {
    graph.for_each_neighbor(u, [&](LocalID, const Weight w) { gain[u] -= w; });
  }
  using Entry = std::pair<Weight, LocalID>;
  std::priority_queue<Entry> queue;
  std::vector<bool> queued(n, false);
  auto push = [&](const LocalID u) {
    queued[u] = true;
    queue.emplace(gain[u], u);
  };

  LocalID start = static_cast<LocalID>(rng.below(n));
  start = farthest_vertex(graph, farthest_vertex(graph, start));
  push(start);
  Weight weight0 = 0;
  std::vector<LocalID> unvisited = random_order(n, rng);

  while (weight0 < target0) {
    if (queue.empty()) {
      while (!unvisited.empty() && queued[unvisited.back()]) {
        unvisited.pop_back();
      }
      if (unvisited.empty()) {
        break;
      }
      push(unvisited.back());
    }
    const auto [g, u] = queue.top();
    queue.pop();
    if (blocks[u] == 0 || g != gain[u]) {
      continue;
    }
    if (weight0 + graph.vertex_weight(u) > max0) {
      continue;
    }
    blocks[u] = 0;
    weight0 += graph.vertex_weight(u);
    graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) {
      if (blocks[v] == 1) {
        gain[v] += 2 * w;
        push(v);
      }
    });
  }
  return blocks;
}

struct Bisection {
  std::vector<BlockID> blocks;
  Weight cut = 0;
  Weight overload = 0;
};

inline Weight bisection_overload(std::span<const Weight> weights, std::span<const Weight> max_weights) {
  return std::max<Weight>(0, weights[0] - max_weights[0]) + std::max<Weight>(0, weights[1] - max_weights[1]);
}

inline bool better(const Bisection &a, const Bisection &b) {
  if ((a.overload == 0) != (b.overload == 0)) {
    return a.overload == 0;
  }
  if (a.overload != b.overload) {
    return a.overload < b.overload;
  }
  return a.cut < b.cut;
}

/// Multilevel bisection with side bounds `max_weights` and the ideal weight
/// `target0` for side 0.
inline Bisection bisect(
    const SeqGraph &graph,
    const Weight target0,
    const std::array<Weight, 2> &max_weights,
    const InitialPartitionConfig &config,
    Random &rng
) {
  std::vector<Contraction> hierarchy;
  const SeqGraph *current = &graph;
  const Weight max_cluster = std::max<Weight>(1, graph.total_weight() / (config.coarsening_limit / 2));
  while (current->n() > config.coarsening_limit) {
    const auto labels = lp_cluster(*current, max_cluster, config.coarsening_iterations, rng);
    Contraction next = contract(*current, labels);
    if (static_cast<double>(next.coarse.n()) * 1.05 > static_cast<double>(current->n())) {
      break;
    }
    hierarchy.push_back(std::move(next));
    current = &hierarchy.back().coarse;
  }

  Bisection best;
  for (int attempt = 0; attempt < std::max(1, config.attempts); ++attempt) {
    Bisection candidate;
    candidate.blocks = grow_bisection(*current, target0, max_weights[0], rng);
    auto weights = weights_of(*current, candidate.blocks, 2);
    rebalance(*current, candidate.blocks, weights, max_weights);
    refine(*current, candidate.blocks, weights, max_weights, config.refinement_iterations, rng);
    candidate.cut = edge_cut(*current, candidate.blocks);
    candidate.overload = bisection_overload(weights, max_weights);
    if (attempt == 0 || better(candidate, best)) {
      best = std::move(candidate);
    }
  }

  for (auto level = hierarchy.rbegin(); level != hierarchy.rend(); ++level) {
    const SeqGraph &fine = std::next(level) == hierarchy.rend() ? graph : std::next(level)->coarse;
    std::vector<BlockID> projected(fine.n());
    for (LocalID u = 0; u < fine.n(); ++u) {
      projected[u] = best.blocks[level->mapping[u]];
    }
    best.blocks = std::move(projected);
    auto weights = weights_of(fine, best.blocks, 2);
    rebalance(fine, best.blocks, weights, max_weights);
    refine(fine, best.blocks, weights, max_weights, config.refinement_iterations, rng);
    best.overload = bisection_overload(weights, max_weights);
  }
  best.cut = edge_cut(graph, best.blocks);
  return best;
}

/// Moves vertices into `side` until it holds at least `needed` vertices.
inline void ensure_vertex_count(const SeqGraph &graph, std::vector<BlockID> &blocks, const BlockID side, const LocalID needed) {
  LocalID count = static_cast<LocalID>(std::count(blocks.begin(), blocks.end(), side));
  while (count < needed) {
    LocalID best = kInvalidLocalID;
    Weight best_gain = 0;
    for (LocalID u = 0; u < graph.n(); ++u) {
      if (blocks[u] == side) {
        continue;
      }
      Weight g = 0;
      graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) { g += blocks[v] == side ? w : -w; });
      if (best == kInvalidLocalID || g > best_gain ||
          (g == best_gain && graph.vertex_weight(u) < graph.vertex_weight(best))) {
        best = u;
        best_gain = g;
      }
    }
    blocks[best] = side;
    ++count;
  }
}

class RecursiveBisector {
public:
  RecursiveBisector(const InitialPartitionConfig &config, Random &rng) : _config(config), _rng(rng) {}

  /// Assigns final part IDs first_part .. first_part + counts.size() - 1.
  void run(
      const SeqGraph &graph,
      std::span<const LocalID> to_root,
      std::span<const BlockID> counts,
      const double eps,
      const BlockID first_part,
      std::vector<BlockID> &result
  ) {
    if (counts.size() == 1 || graph.n() == 0) {
      for (const LocalID u : to_root) {
        result[u] = first_part;
      }
      return;
    }

    const std::size_t split = (counts.size() + 1) / 2;
    const auto left = counts.first(split);
    const auto right = counts.subspan(split);
    const auto f0 = std::accumulate(left.begin(), left.end(), std::int64_t{0});
    const auto f1 = std::accumulate(right.begin(), right.end(), std::int64_t{0});
    const int depth = std::bit_width(counts.size() - 1);
    const double level_eps = std::pow(1.0 + eps, 1.0 / depth) - 1.0;
    const Weight total = graph.total_weight();
    const std::array<Weight, 2> max_weights{
        l_max_share(total, f0, f0 + f1, level_eps, graph.max_vertex_weight()),
        l_max_share(total, f1, f0 + f1, level_eps, graph.max_vertex_weight())
    };
    const auto target0 = static_cast<Weight>(static_cast<__int128>(total) * f0 / (f0 + f1));

    Bisection bisection = bisect(graph, target0, max_weights, _config, _rng);
    if (graph.n() >= counts.size()) {
      ensure_vertex_count(graph, bisection.blocks, 0, static_cast<LocalID>(left.size()));
      ensure_vertex_count(graph, bisection.blocks, 1, static_cast<LocalID>(right.size()));
    }

    for (BlockID side = 0; side < 2; ++side) {
      Subgraph sub = extract_block(graph, bisection.blocks, side);
      const auto side_counts = side == 0 ? left : right;
      const std::int64_t f_side = side == 0 ? f0 : f1;
      std::vector<LocalID> sub_to_root(sub.to_parent.size());
      for (std::size_t i = 0; i < sub.to_parent.size(); ++i) {
        sub_to_root[i] = to_root[sub.to_parent[i]];
      }
      // Slack left for the side: its share of the region's allowance.
      double side_eps = 0.0;
      if (sub.graph.total_weight() > 0) {
        side_eps = (1.0 + eps) * static_cast<double>(f_side) / static_cast<double>(f0 + f1) *
                       static_cast<double>(total) / static_cast<double>(sub.graph.total_weight()) -
                   1.0;
      }
      side_eps = std::clamp(side_eps, 0.0, eps);
      run(sub.graph, sub_to_root, side_counts, side_eps, first_part + (side == 0 ? 0 : static_cast<BlockID>(split)), result);
    }
  }

private:
  const InitialPartitionConfig &_config;
  Random &_rng;
};

} // namespace seq

/// Partitions `graph` into counts.size() parts with explicit per-part weight
/// bounds; part i targets counts[i] / sum(counts) of the weight.
inline SeqPartitionResult partition_seq_bounded(
    const SeqGraph &graph,
    std::span<const BlockID> counts,
    std::span<const Weight> max_weights,
    const double eps,
    const std::uint64_t seed,
    const InitialPartitionConfig &config = {}
) {
  expects(!counts.empty(), "need at least one part");
  expects(counts.size() == max_weights.size(), "one bound per part");
  const auto k = static_cast<BlockID>(counts.size());

  SeqPartitionResult result;
  result.blocks.assign(graph.n(), 0);
  Random rng(seed);
  if (k > 1) {
    std::vector<LocalID> identity(graph.n());
    std::iota(identity.begin(), identity.end(), 0);
    seq::RecursiveBisector(config, rng).run(graph, identity, counts, eps, 0, result.blocks);
    auto weights = seq::weights_of(graph, result.blocks, k);
    seq::rebalance(graph, result.blocks, weights, max_weights);
    seq::refine(graph, result.blocks, weights, max_weights, config.refinement_iterations, rng);
  }
  result.block_weights = seq::weights_of(graph, result.blocks, k);
  result.cut = edge_cut(graph, result.blocks);
  for (BlockID b = 0; b < k; ++b) {
    result.max_overload = std::max(result.max_overload, result.block_weights[b] - max_weights[b]);
  }
  result.feasible = result.max_overload <= 0;
  result.max_overload = std::max<Weight>(0, result.max_overload);
  return result;
}

/// Bounds max{(1 + eps) * share, share + max c(v)} with share proportional to
/// the final block counts.
inline std::vector<Weight> proportional_max_weights(const SeqGraph &graph, std::span<const BlockID> counts, const double eps) {
  const auto total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  std::vector<Weight> bounds;
  for (const BlockID f : counts) {
    bounds.push_back(l_max_share(graph.total_weight(), f, total, eps, graph.max_vertex_weight()));
  }
  return bounds;
}

inline SeqPartitionResult partition_seq(
    const SeqGraph &graph, const BlockID k, const double eps, const std::uint64_t seed, const InitialPartitionConfig &config = {}
) {
  expects(k >= 1, "k must be at least 1");
  const std::vector<BlockID> counts(k, 1);
  return partition_seq_bounded(graph, counts, proportional_max_weights(graph, counts, eps), eps, seed, config);
}

//
// Replication and selection across a PE group
//

struct CandidateScore {
  std::uint32_t feasible;
  Weight overload;
  Weight cut;
};

/// Feasible candidates beat infeasible ones; then smaller overload, smaller
/// cut, lower rank.
inline std::size_t select_best(std::span<const CandidateScore> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const auto &a = scores[i];
    const auto &b = scores[best];
    if (a.feasible != b.feasible) {
      if (a.feasible != 0) {
        best = i;
      }
      continue;
    }
    if (a.overload != b.overload) {
      if (a.overload < b.overload) {
        best = i;
      }
      continue;
    }
    if (a.cut < b.cut) {
      best = i;
    }
  }
  return best;
}

struct SelectedPartition {
  /// Labels of owned and ghost vertices.
  std::vector<BlockID> blocks;
  CandidateScore score;
  int winner;
};

/// Gathers the graph on every PE, partitions it with seed + rank and keeps
/// the best candidate of the group on all PEs.
inline SelectedPartition replicate_and_select(
    const DistGraph &graph,
    msg::PEGroup &group,
    std::span<const BlockID> counts,
    std::span<const Weight> max_weights,
    const double eps,
    const std::uint64_t seed,
    const InitialPartitionConfig &config = {}
) {
  const SeqGraph whole = gather(graph, group);
  const auto local = partition_seq_bounded(whole, counts, max_weights, eps, seed + group.rank(), config);
  const CandidateScore mine{local.feasible ? 1u : 0u, local.max_overload, local.cut};
  const auto scores = msg::allgather_one(group, mine);
  const auto winner = static_cast<int>(select_best(scores));
  const auto labels = msg::broadcast<BlockID>(group, local.blocks, winner);

  SelectedPartition selected;
  selected.blocks.resize(graph.n_total());
  for (LocalID u = 0; u < graph.n_total(); ++u) {
    selected.blocks[u] = labels[graph.local_to_global(u)];
  }
  selected.score = scores[winner];
  selected.winner = winner;
  return selected;
}

} // namespace dkmp
