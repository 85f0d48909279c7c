/*******************************************************************************
 * Deep multilevel partitioning.
 *
 * The graph is coarsened well below C * k vertices. Whenever a level has fewer
 * than C * P vertices, the PE group is split and every sub-group continues on
 * its own copy of the graph; the best copy wins when the groups re-merge.
 * During uncoarsening the partition is extended so that a level with n
 * vertices has min{k, ceil2(n / C)} blocks: block-induced subgraphs are
 * shipped whole to single PEs and split sequentially.
 *
 * Every block carries the number of final blocks it will be split into, so
 * k need not be a power of two. Its weight bound is the corresponding share
 * of the final bound.
 *
 * @file:   deep_driver.hpp
 ******************************************************************************/
#pragma once

#include <bit>
#include <chrono>
#include <unordered_map>

#include "dkmp/balancer.hpp"
#include "dkmp/contraction.hpp"
#include "dkmp/initial_partition.hpp"
#include "dkmp/lp_clustering.hpp"
#include "dkmp/lp_refinement.hpp"

namespace dkmp {

inline GlobalID ceil2(const GlobalID x) {
  expects(x >= 1, "ceil2 needs a positive argument");
  return std::bit_ceil(x);
}

enum class Preset : std::uint8_t { kFast, kStrong };

struct DeepConfig {
  BlockID k = 2;
  double eps = 0.03;
  GlobalID contraction_limit = 2000;
  BlockID K = 2;
  int lp_iterations = 3;
  std::uint64_t seed = 0;

  double delta = 1.1;
  double shrink_threshold = 1.05;
  std::size_t alpha = 8;
  std::size_t beta = 128;
  LocalID chunk_size = kDefaultChunkSize;
  std::size_t balance_candidates = 4;
  InitialPartitionConfig initial;

  static DeepConfig preset(const Preset preset) {
    DeepConfig config;
    if (preset == Preset::kStrong) {
      config.contraction_limit = 5000;
      config.lp_iterations = 5;
    }
    return config;
  }
};

struct ExtensionStep {
  GlobalID n;
  BlockID blocks_before;
  BlockID blocks_after;
  int group_size;
};

struct DeepStats {
  int levels = 0;
  /// Vertex count of every level visited by this PE, finest first.
  std::vector<GlobalID> level_sizes;
  int replications = 0;
  std::vector<ExtensionStep> extensions;
  /// Balancer runs on coarse levels that ended infeasible.
  int balancer_failures = 0;

  double coarsening_seconds = 0.0;
  double extension_seconds = 0.0;
  double refinement_seconds = 0.0;
};

namespace detail {

class PhaseTimer {
public:
  explicit PhaseTimer(double &total) : _total(total), _start(std::chrono::steady_clock::now()) {}
  PhaseTimer(const PhaseTimer &) = delete;
  PhaseTimer &operator=(const PhaseTimer &) = delete;
  ~PhaseTimer() {
    _total += std::chrono::duration<double>(std::chrono::steady_clock::now() - _start).count();
  }

private:
  double &_total;
  std::chrono::steady_clock::time_point _start;
};

} // namespace detail

struct DeepResult {
  Partition partition;
  bool feasible = true;
  std::string failure;
  DeepStats stats;
};

//
// Block distribution
//

struct BlockSubgraph {
  BlockID block;
  SeqGraph graph;
  /// Global ID of every subgraph vertex.
  std::vector<GlobalID> vertices;
};

/// Ships the subgraph induced by block b to PE b mod P. Returns the blocks
/// received by this PE in increasing order, including empty ones.
inline std::vector<BlockSubgraph> distribute_blocks(
    const DistGraph &graph, std::span<const BlockID> blocks, const BlockID num_blocks, msg::PEGroup &group
) {
  struct VertexShip {
    GlobalID gid;
    BlockID block;
    Weight weight;
    std::uint64_t degree;
  };
  struct EdgeShip {
    GlobalID target;
    Weight weight;
  };

  const int pes = group.size();
  std::vector<std::vector<VertexShip>> vertex_out(pes);
  std::vector<std::vector<EdgeShip>> edge_out(pes);
  for (LocalID u = 0; u < graph.n_owned(); ++u) {
    const BlockID b = blocks[u];
    const int pe = static_cast<int>(b % pes);
    const std::size_t before = edge_out[pe].size();
    graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) {
      if (blocks[v] == b) {
        edge_out[pe].push_back({graph.local_to_global(v), w});
      }
    });
    vertex_out[pe].push_back({graph.local_to_global(u), b, graph.vertex_weight(u), edge_out[pe].size() - before});
  }
  const auto vertex_in = msg::sparse_all_to_all(group, vertex_out);
  const auto edge_in = msg::sparse_all_to_all(group, edge_out);

  std::vector<BlockSubgraph> result;
  std::unordered_map<BlockID, std::size_t> slot;
  for (BlockID b = static_cast<BlockID>(group.rank()); b < num_blocks; b += pes) {
    slot.emplace(b, result.size());
    result.push_back({b, SeqGraph(), {}});
  }

  struct Pending {
    std::vector<Weight> weights;
    std::vector<std::uint64_t> xadj{0};
    std::vector<GlobalID> targets;
    std::vector<Weight> edge_weights;
  };
  std::vector<Pending> pending(result.size());
  std::unordered_map<GlobalID, LocalID> local_id;
  for (int pe = 0; pe < pes; ++pe) {
    std::size_t cursor = 0;
    for (const auto &v : vertex_in[pe]) {
      const std::size_t s = slot.at(v.block);
      auto &p = pending[s];
      local_id.emplace(v.gid, static_cast<LocalID>(result[s].vertices.size()));
      result[s].vertices.push_back(v.gid);
      p.weights.push_back(v.weight);
      for (std::uint64_t i = 0; i < v.degree; ++i, ++cursor) {
        p.targets.push_back(edge_in[pe][cursor].target);
        p.edge_weights.push_back(edge_in[pe][cursor].weight);
      }
      p.xadj.push_back(p.targets.size());
    }
  }
  for (std::size_t s = 0; s < result.size(); ++s) {
    auto &p = pending[s];
    std::vector<LocalID> adjncy(p.targets.size());
    for (std::size_t e = 0; e < p.targets.size(); ++e) {
      adjncy[e] = local_id.at(p.targets[e]);
    }
    result[s].graph = SeqGraph(std::move(p.xadj), std::move(adjncy), std::move(p.weights), std::move(p.edge_weights));
  }
  return result;
}

/// Splits `count` final blocks into `parts` nearly equal counts, larger first.
inline std::vector<BlockID> split_count(const BlockID count, const BlockID parts) {
  std::vector<BlockID> result(parts, count / parts);
  for (BlockID j = 0; j < count % parts; ++j) {
    ++result[j];
  }
  return result;
}

namespace detail {

class DeepPartitioner {
public:
  explicit DeepPartitioner(const DeepConfig &config) : _config(config), _seed(config.seed) {}

  struct State {
    std::vector<BlockID> blocks;
    /// Number of final blocks each current block will be split into.
    std::vector<BlockID> counts;
  };

  DeepResult run(const DistGraph &graph, msg::PEGroup &group) {
    DeepResult result;
    State state = level(graph, group, 0);
    if (state.counts.size() < _config.k) {
      extend(graph, group, state, [](BlockID f) { return f; }, 0);
      const auto balance = balance_and_refine(graph, group, state, 0);
      result.failure = balance.failure;
    }
    ensure_nonempty(graph, group, state.blocks);

    result.partition = make_partition(graph, group, std::move(state.blocks), bounds(graph, state.counts));
    if (!result.partition.feasible()) {
      const auto balance = rebalance(graph, result.partition, group, {.candidates_per_block = _config.balance_candidates});
      result.failure = balance.failure;
    }
    result.feasible = result.partition.feasible();
    if (result.feasible) {
      result.failure.clear();
    } else if (result.failure.empty()) {
      result.failure = "balance constraint violated";
    }
    result.stats = _stats;
    return result;
  }

private:
  [[nodiscard]] std::vector<Weight> bounds(const DistGraph &graph, std::span<const BlockID> counts) const {
    std::vector<Weight> result;
    result.reserve(counts.size());
    for (const BlockID f : counts) {
      result.push_back(l_max_share(graph.total_weight(), f, _config.k, _config.eps, graph.max_vertex_weight()));
    }
    return result;
  }

  std::uint64_t next_seed(const int depth) {
    return mix_seed(_seed, {static_cast<std::uint64_t>(depth), _steps++});
  }

  State level(const DistGraph &graph, msg::PEGroup &group, const int depth) {
    _stats.levels = std::max(_stats.levels, depth + 1);
    const GlobalID n = graph.global_n();
    _stats.level_sizes.push_back(n);
    const GlobalID C = _config.contraction_limit;
    const auto P = static_cast<GlobalID>(group.size());

    State state;
    bool coarsened = false;
    if (n > C * std::min(_config.k, _config.K)) {
      if (n < C * P) {
        const GlobalID copies = P / ceil2(detail::ceil_div(n, C));
        if (copies > 1) {
          return replicate(graph, group, static_cast<int>(copies), depth);
        }
      }
      std::optional<detail::PhaseTimer> timer(std::in_place, _stats.coarsening_seconds);
      const Clustering clustering = cluster(
          graph,
          group,
          _config.k,
          C,
          _config.eps,
          {.iterations = _config.lp_iterations,
           .alpha = _config.alpha,
           .beta = _config.beta,
           .chunk_size = _config.chunk_size},
          next_seed(depth)
      );
      CoarseningLevel coarse = contract(graph, clustering, group, _config.delta);
      timer.reset();
      const GlobalID n_coarse = coarse.coarse.global_n();
      if (static_cast<double>(n_coarse) * _config.shrink_threshold <= static_cast<double>(n)) {
        State coarse_state = level(coarse.coarse, group, depth + 1);
        state.blocks = project_labels(graph, coarse, coarse_state.blocks, group);
        state.counts = std::move(coarse_state.counts);
        balance_and_refine(graph, group, state, depth);
        coarsened = true;
      }
    }
    if (!coarsened) {
      state.blocks.assign(graph.n_total(), 0);
      state.counts = {_config.k};
    }

    const auto target = static_cast<BlockID>(std::min<GlobalID>(_config.k, ceil2(std::max<GlobalID>(1, detail::ceil_div(n, C)))));
    auto splittable = [&] {
      return std::any_of(state.counts.begin(), state.counts.end(), [](BlockID f) { return f > 1; });
    };
    while (state.counts.size() < target && splittable()) {
      const auto current = static_cast<BlockID>(state.counts.size());
      const BlockID s = std::max<BlockID>(2, std::min<BlockID>(_config.K, target / current));
      extend(graph, group, state, [s](BlockID f) { return std::min(s, f); }, depth);
      balance_and_refine(graph, group, state, depth);
    }
    return state;
  }

  State replicate(const DistGraph &graph, msg::PEGroup &group, const int copies, const int depth) {
    ++_stats.replications;
    const SeqGraph whole = gather(graph, group);
    msg::PEGroup sub = group.split(copies);
    const int copy = group.rank() / sub.size();
    const DistGraph replica = build_local(whole, balanced_distribution(whole.n(), sub.size()), sub.rank());

    const std::uint64_t saved = _seed;
    _seed = mix_seed(_seed, {static_cast<std::uint64_t>(depth), static_cast<std::uint64_t>(copy), 0x7265706cULL});
    State state = level(replica, sub, depth);
    _seed = saved;

    Partition p = make_partition(replica, sub, state.blocks, bounds(replica, state.counts));
    const CandidateScore mine{p.feasible() ? 1u : 0u, p.total_overload(), edge_cut(replica, sub, state.blocks)};
    const auto scores = msg::allgather_one(group, mine);
    std::vector<CandidateScore> per_copy;
    for (int c = 0; c < copies; ++c) {
      per_copy.push_back(scores[c * sub.size()]);
    }
    const int winner = static_cast<int>(select_best(per_copy)) * sub.size();

    const auto labels = msg::allgatherv<BlockID>(sub, std::span(state.blocks).first(replica.n_owned()));
    const auto all_labels = msg::broadcast<BlockID>(group, labels, winner);
    const auto counts = msg::broadcast<BlockID>(group, state.counts, winner);

    State merged;
    merged.blocks.resize(graph.n_total());
    for (LocalID u = 0; u < graph.n_total(); ++u) {
      merged.blocks[u] = all_labels[graph.local_to_global(u)];
    }
    merged.counts = counts;
    return merged;
  }

  /// Splits every block b into parts(counts[b]) sub-blocks.
  template <typename Parts>
  void extend(const DistGraph &graph, msg::PEGroup &group, State &state, Parts &&parts, const int depth) {
    const PhaseTimer timer(_stats.extension_seconds);
    const auto num_blocks = static_cast<BlockID>(state.counts.size());
    std::vector<std::vector<BlockID>> sub_counts(num_blocks);
    std::vector<BlockID> first(num_blocks + 1, 0);
    std::vector<BlockID> counts;
    for (BlockID b = 0; b < num_blocks; ++b) {
      sub_counts[b] = split_count(state.counts[b], parts(state.counts[b]));
      first[b + 1] = first[b] + static_cast<BlockID>(sub_counts[b].size());
      counts.insert(counts.end(), sub_counts[b].begin(), sub_counts[b].end());
    }
    _stats.extensions.push_back({graph.global_n(), num_blocks, first.back(), group.size()});

    // The first sequential partitioning of a run uses the run seed itself.
    const std::uint64_t seed = _extensions++ == 0 ? _seed : next_seed(depth);
    const auto weights = compute_block_weights(graph, group, state.blocks, num_blocks);
    auto block_eps = [&](const BlockID b) {
      if (weights[b] == 0) {
        return _config.eps;
      }
      const double slack = static_cast<double>(state.counts[b]) * (1.0 + _config.eps) *
                               static_cast<double>(graph.total_weight()) /
                               (static_cast<double>(_config.k) * static_cast<double>(weights[b])) -
                           1.0;
      return std::max(0.0, slack);
    };
    auto sub_bounds = [&](const BlockID b) {
      return bounds(graph, sub_counts[b]);
    };

    // A small single-block graph is partitioned on every PE with distinct
    // seeds and the best result is kept; larger ones go to one PE.
    const bool small = graph.global_n() <= _config.contraction_limit * std::min(_config.k, _config.K);
    if (num_blocks == 1 && small && group.size() > 1) {
      const auto selected = replicate_and_select(
          graph, group, sub_counts[0], sub_bounds(0), block_eps(0), seed, _config.initial
      );
      state.blocks = selected.blocks;
      state.counts = std::move(counts);
      return;
    }

    struct LabelWrite {
      GlobalID gid;
      BlockID block;
    };
    std::vector<std::vector<LabelWrite>> writes(group.size());
    for (const auto &sub : distribute_blocks(graph, state.blocks, num_blocks, group)) {
      const BlockID b = sub.block;
      std::vector<BlockID> local(sub.graph.n(), 0);
      if (sub.graph.n() > 0) {
        const auto bounds_b = sub_bounds(b);
        local = partition_seq_bounded(
                    sub.graph, sub_counts[b], bounds_b, block_eps(b), num_blocks == 1 ? seed : mix_seed(seed, {b}), _config.initial
        )
                    .blocks;
      }
      for (LocalID u = 0; u < sub.graph.n(); ++u) {
        const GlobalID gid = sub.vertices[u];
        writes[owner_of(graph.vtxdist(), gid)].push_back({gid, first[b] + local[u]});
      }
    }
    for (const auto &list : msg::sparse_all_to_all(group, writes)) {
      for (const auto &[gid, block] : list) {
        state.blocks[gid - graph.offset()] = block;
      }
    }
    sync_block_labels(graph, group, state.blocks);
    state.counts = std::move(counts);
  }

  BalancerResult balance_and_refine(const DistGraph &graph, msg::PEGroup &group, State &state, const int depth) {
    const PhaseTimer timer(_stats.refinement_seconds);
    Partition p = make_partition(graph, group, std::move(state.blocks), bounds(graph, state.counts));
    const BalancerConfig balance{.candidates_per_block = _config.balance_candidates};
    BalancerResult result = rebalance(graph, p, group, balance);
    refine(
        graph,
        p,
        group,
        {.iterations = _config.lp_iterations,
         .alpha = _config.alpha,
         .beta = _config.beta,
         .chunk_size = _config.chunk_size},
        next_seed(depth)
    );
    if (!p.feasible()) {
      result = rebalance(graph, p, group, balance);
    }
    if (!p.feasible()) {
      ++_stats.balancer_failures;
    }
    state.blocks = std::move(p.blocks);
    return result;
  }

  /// Moves a lightest vertex of the heaviest block with at least two vertices
  /// into every empty block.
  void ensure_nonempty(const DistGraph &graph, msg::PEGroup &group, std::vector<BlockID> &blocks) {
    const BlockID k = _config.k;
    std::vector<Weight> local_sizes(k, 0);
    for (LocalID u = 0; u < graph.n_owned(); ++u) {
      ++local_sizes[blocks[u]];
    }
    auto sizes = msg::allreduce_sum<Weight>(group, local_sizes);
    auto weights = compute_block_weights(graph, group, blocks, k);

    struct Proposal {
      Weight weight;
      GlobalID gid;
    };
    bool changed = false;
    for (BlockID empty = 0; empty < k; ++empty) {
      if (sizes[empty] > 0) {
        continue;
      }
      BlockID source = kInvalidBlockID;
      for (BlockID b = 0; b < k; ++b) {
        if (sizes[b] >= 2 && (source == kInvalidBlockID || weights[b] > weights[source])) {
          source = b;
        }
      }
      if (source == kInvalidBlockID) {
        break;
      }
      Proposal mine{std::numeric_limits<Weight>::max(), kInvalidGlobalID};
      for (LocalID u = 0; u < graph.n_owned(); ++u) {
        const Weight w = graph.vertex_weight(u);
        if (blocks[u] == source && w < mine.weight) {
          mine = {w, graph.local_to_global(u)};
        }
      }
      Proposal best = mine;
      for (const auto &p : msg::allgather_one(group, mine)) {
        if (p.weight < best.weight || (p.weight == best.weight && p.gid < best.gid)) {
          best = p;
        }
      }
      if (graph.is_owned_global(best.gid)) {
        blocks[best.gid - graph.offset()] = empty;
      }
      --sizes[source];
      ++sizes[empty];
      weights[source] -= best.weight;
      weights[empty] += best.weight;
      changed = true;
    }
    if (changed) {
      sync_block_labels(graph, group, blocks);
    }
  }

  DeepConfig _config;
  std::uint64_t _seed;
  std::uint64_t _steps = 0;
  std::uint64_t _extensions = 0;
  DeepStats _stats;
};

} // namespace detail

/// k-way partition of `graph` on all PEs of `group`. The group size must be a
/// power of two.
inline DeepResult deep_partition(const DistGraph &graph, msg::PEGroup &group, const DeepConfig &config) {
  expects(config.k >= 1, "k must be at least 1");
  expects(config.contraction_limit >= 2, "contraction limit must be at least 2");
  expects(config.K >= 2, "extension factor K must be at least 2");
  expects(config.eps >= 0.0, "epsilon must be non-negative");
  expects(std::has_single_bit(static_cast<unsigned>(group.size())), "number of PEs must be a power of two");

  if (config.k == 1) {
    DeepResult result;
    result.partition = make_partition(graph, group, std::vector<BlockID>(graph.n_total(), 0), uniform_max_block_weights(graph, 1, config.eps));
    result.feasible = result.partition.feasible();
    return result;
  }
  return detail::DeepPartitioner(config).run(graph, group);
}

} // namespace dkmp
