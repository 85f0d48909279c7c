/*******************************************************************************
 * Greedy global balancer.
 *
 * Every PE keeps, per overloaded block B, a queue of its own vertices in B
 * ordered by relative gain, holding just enough weight to remove the excess
 * o(B). Each round the PEs reduce their best candidates along a binary tree;
 * the root commits the globally best moves that do not overload their target
 * and broadcasts them. Gains of neighbors of moved vertices are refreshed.
 *
 * @file:   balancer.hpp
 ******************************************************************************/
#pragma once

#include <set>

#include "dkmp/partition.hpp"
#include "dkmp/rating_map.hpp"
#include "dkmp/rel_gain.hpp"

namespace dkmp {

struct BalancerConfig {
  std::size_t candidates_per_block = 4;
  /// 0 selects sum(overload) / min c(v) + 64.
  std::uint64_t max_rounds = 0;
};

struct BalancerResult {
  bool feasible = true;
  std::uint64_t rounds = 0;
  std::uint64_t moves = 0;
  Weight initial_overload = 0;
  Weight residual_overload = 0;
  /// False if a queue ever held more than o(B) + max c(v).
  bool queue_bound_held = true;
  std::string failure;
};

struct MoveCandidate {
  GlobalID vertex;
  BlockID from;
  BlockID to;
  Weight gain;
  Weight weight;

  [[nodiscard]] RelGain key() const {
    return rel_gain(gain, weight);
  }
};

/// Strict order of candidates: higher relative gain first, then heavier,
/// then smaller vertex ID.
inline bool candidate_before(const MoveCandidate &a, const MoveCandidate &b) {
  const auto order = a.key() <=> b.key();
  if (order != 0) {
    return order > 0;
  }
  if (a.weight != b.weight) {
    return a.weight > b.weight;
  }
  return a.vertex < b.vertex;
}

namespace detail {

/// Per-block candidate lists, grouped by source block and ordered within.
/// Keeps at most `limit` candidates per block, fewer if a shorter prefix
/// already covers the block's excess weight.
inline std::vector<MoveCandidate> truncate_candidates(
    std::vector<MoveCandidate> candidates, std::span<const Weight> overloads, const std::size_t limit
) {
  std::sort(candidates.begin(), candidates.end(), [](const MoveCandidate &a, const MoveCandidate &b) {
    return a.from != b.from ? a.from < b.from : candidate_before(a, b);
  });
  std::vector<MoveCandidate> kept;
  std::size_t count = 0;
  Weight covered = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i == 0 || candidates[i].from != candidates[i - 1].from) {
      count = 0;
      covered = 0;
    }
    if (count >= limit || covered >= overloads[candidates[i].from]) {
      continue;
    }
    kept.push_back(candidates[i]);
    ++count;
    covered += candidates[i].weight;
  }
  return kept;
}

class Balancer {
public:
  Balancer(const DistGraph &graph, Partition &partition, msg::PEGroup &group, const BalancerConfig &config)
      : _graph(graph),
        _p(partition),
        _group(group),
        _config(config),
        _queues(partition.k),
        _queue_weight(partition.k, 0),
        _queued(graph.n_owned(), 0),
        _entries(graph.n_owned()) {}

  BalancerResult run() {
    BalancerResult result;
    result.initial_overload = _p.total_overload();
    if (result.initial_overload == 0) {
      return result;
    }

    Weight local_min = std::numeric_limits<Weight>::max();
    for (LocalID u = 0; u < _graph.n_owned(); ++u) {
      local_min = std::min(local_min, _graph.vertex_weight(u));
    }
    const Weight min_weight = std::max<Weight>(1, -msg::allreduce_max<Weight>(_group, -local_min));
    const std::uint64_t max_rounds = _config.max_rounds > 0
                                         ? _config.max_rounds
                                         : static_cast<std::uint64_t>(result.initial_overload / min_weight) + 64;

    while (_p.total_overload() > 0) {
      if (result.rounds >= max_rounds) {
        result.failure = "round limit reached";
        break;
      }
      ++result.rounds;
      refill();
      result.queue_bound_held &= _bound_held;

      const auto taken = take_candidates();
      std::vector<MoveCandidate> merged = msg::tree_reduce(_group, taken, [&](auto own, const auto &received) {
        own.insert(own.end(), received.begin(), received.end());
        return truncate_candidates(std::move(own), overloads(), _config.candidates_per_block);
      });
      const bool any_candidate = msg::allreduce_or(_group, !merged.empty());
      if (!any_candidate) {
        result.failure = "no movable vertex in an overloaded block";
        break;
      }

      std::vector<MoveCandidate> commits;
      if (_group.is_root()) {
        commits = commit(std::move(merged));
      }
      commits = msg::broadcast<MoveCandidate>(_group, commits);
      if (commits.empty()) {
        result.failure = "no candidate fits into any block";
        break;
      }
      apply(commits, taken);
      result.moves += commits.size();
      result.queue_bound_held &= _bound_held;
    }

    result.residual_overload = _p.total_overload();
    result.feasible = result.residual_overload == 0;
    if (result.feasible) {
      result.failure.clear();
    }
    return result;
  }

private:
  struct Entry {
    MoveCandidate candidate;
    LocalID u;
  };

  struct EntryOrder {
    bool operator()(const Entry &a, const Entry &b) const {
      return candidate_before(a.candidate, b.candidate);
    }
  };

  [[nodiscard]] std::vector<Weight> overloads() const {
    std::vector<Weight> o(_p.k);
    for (BlockID b = 0; b < _p.k; ++b) {
      o[b] = _p.overload(b);
    }
    return o;
  }

  /// Best admissible move of owned vertex u out of its block, if any.
  std::optional<MoveCandidate> evaluate(const LocalID u) {
    const BlockID from = _p.blocks[u];
    const Weight wu = _graph.vertex_weight(u);
    const auto &weights = _p.block_weights;
    const auto &max_weights = _p.max_block_weights;
    _ratings.reset(_graph.degree(u));
    _graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) { _ratings.add(_p.blocks[v], w); });

    BlockID target = kInvalidBlockID;
    Weight target_rating = 0;
    _ratings.for_each([&](const BlockID b, const Weight rating) {
      if (b == from || weights[b] + wu > max_weights[b]) {
        return;
      }
      if (target == kInvalidBlockID || rating > target_rating ||
          (rating == target_rating && (weights[b] < weights[target] || (weights[b] == weights[target] && b < target)))) {
        target = b;
        target_rating = rating;
      }
    });
    if (target == kInvalidBlockID) {
      for (BlockID b = 0; b < _p.k; ++b) {
        if (b != from && weights[b] + wu <= max_weights[b] &&
            (target == kInvalidBlockID || weights[b] < weights[target])) {
          target = b;
        }
      }
      target_rating = 0;
    }
    if (target == kInvalidBlockID) {
      return std::nullopt;
    }
    return MoveCandidate{_graph.local_to_global(u), from, target, target_rating - _ratings.get(from), wu};
  }

  void check_bound(const BlockID b) {
    _bound_held &= _queue_weight[b] <= _p.overload(b) + _graph.max_vertex_weight();
  }

  void erase(const LocalID u) {
    if (!_queued[u]) {
      return;
    }
    const BlockID b = _entries[u].candidate.from;
    _queues[b].erase(_entries[u]);
    _queue_weight[b] -= _entries[u].candidate.weight;
    _queued[u] = 0;
  }

  void evict_worst(const BlockID b) {
    const Entry worst = *_queues[b].rbegin();
    erase(worst.u);
  }

  /// Drops the worst entries while the rest still covers o(B).
  void trim(const BlockID b) {
    const Weight o = _p.overload(b);
    while (!_queues[b].empty() && _queue_weight[b] - _queues[b].rbegin()->candidate.weight >= o) {
      evict_worst(b);
    }
    check_bound(b);
  }

  /// Queue insertion: always while the queue holds less than o(B), else only
  /// if better than the current worst entry, followed by trimming.
  void insert(const LocalID u) {
    const BlockID b = _p.blocks[u];
    if (_p.overload(b) == 0) {
      return;
    }
    const auto candidate = evaluate(u);
    if (!candidate) {
      return;
    }
    const Entry entry{*candidate, u};
    auto &queue = _queues[b];
    if (_queue_weight[b] >= _p.overload(b) && !queue.empty() && !EntryOrder{}(entry, *queue.rbegin())) {
      return;
    }
    queue.insert(entry);
    _entries[u] = entry;
    _queued[u] = 1;
    _queue_weight[b] += entry.candidate.weight;
    trim(b);
  }

  void refresh(const LocalID u) {
    erase(u);
    insert(u);
  }

  /// Scans blocks whose queue cannot cover their excess.
  void refill() {
    std::vector<char> scan(_p.k, 0);
    bool any = false;
    for (BlockID b = 0; b < _p.k; ++b) {
      scan[b] = _p.overload(b) > 0 && _queue_weight[b] < _p.overload(b);
      any |= scan[b] != 0;
    }
    if (!any) {
      return;
    }
    for (LocalID u = 0; u < _graph.n_owned(); ++u) {
      if (!_queued[u] && scan[_p.blocks[u]]) {
        insert(u);
      }
    }
  }

  /// Pops this PE's best candidates per overloaded block, re-evaluating
  /// stale entries against the current block weights.
  std::vector<MoveCandidate> take_candidates() {
    std::vector<MoveCandidate> taken;
    for (BlockID b = 0; b < _p.k; ++b) {
      const Weight o = _p.overload(b);
      std::size_t count = 0;
      Weight covered = 0;
      while (o > 0 && count < _config.candidates_per_block && covered < o && !_queues[b].empty()) {
        const Entry top = *_queues[b].begin();
        erase(top.u);
        const auto fresh = evaluate(top.u);
        if (!fresh) {
          continue;
        }
        if (fresh->to != top.candidate.to || fresh->gain != top.candidate.gain) {
          insert(top.u);
          if (!_queued[top.u] || _queues[b].begin()->u != top.u) {
            continue;
          }
          erase(top.u);
        }
        taken.push_back(*fresh);
        ++count;
        covered += fresh->weight;
      }
    }
    std::sort(taken.begin(), taken.end(), [](const MoveCandidate &a, const MoveCandidate &b) {
      return a.from != b.from ? a.from < b.from : candidate_before(a, b);
    });
    return taken;
  }

  /// Root: best-first commitment without overloading any target.
  std::vector<MoveCandidate> commit(std::vector<MoveCandidate> candidates) const {
    std::sort(candidates.begin(), candidates.end(), candidate_before);
    std::vector<Weight> weights = _p.block_weights;
    std::vector<MoveCandidate> commits;
    for (const auto &c : candidates) {
      if (weights[c.from] <= _p.max_block_weights[c.from] || weights[c.to] + c.weight > _p.max_block_weights[c.to]) {
        continue;
      }
      weights[c.from] -= c.weight;
      weights[c.to] += c.weight;
      commits.push_back(c);
    }
    return commits;
  }

  void apply(std::span<const MoveCandidate> commits, std::span<const MoveCandidate> taken) {
    std::vector<LocalID> touched;
    for (const auto &c : commits) {
      _p.block_weights[c.from] -= c.weight;
      _p.block_weights[c.to] += c.weight;
      const LocalID local = _graph.global_to_local(c.vertex);
      if (local == kInvalidLocalID) {
        continue;
      }
      _p.blocks[local] = c.to;
      if (_graph.is_owned(local)) {
        erase(local);
        _graph.for_each_neighbor(local, [&](const LocalID v, Weight) {
          if (_graph.is_owned(v)) {
            touched.push_back(v);
          }
        });
      } else {
        const auto neighbors = _graph.ghost_neighbors(local);
        touched.insert(touched.end(), neighbors.begin(), neighbors.end());
      }
    }

    for (BlockID b = 0; b < _p.k; ++b) {
      if (_p.overload(b) == 0) {
        while (!_queues[b].empty()) {
          evict_worst(b);
        }
      }
    }
    for (const auto &c : taken) {
      const LocalID u = static_cast<LocalID>(c.vertex - _graph.offset());
      if (_p.blocks[u] == c.from) {
        insert(u);
      }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (const LocalID v : touched) {
      if (_queued[v] || _p.overload(_p.blocks[v]) > 0) {
        refresh(v);
      }
    }
    for (BlockID b = 0; b < _p.k; ++b) {
      trim(b);
    }
  }

  const DistGraph &_graph;
  Partition &_p;
  msg::PEGroup &_group;
  BalancerConfig _config;

  std::vector<std::set<Entry, EntryOrder>> _queues;
  std::vector<Weight> _queue_weight;
  std::vector<char> _queued;
  std::vector<Entry> _entries;
  RatingMap<BlockID> _ratings;
  bool _bound_held = true;
};

} // namespace detail

/// Moves vertices out of overloaded blocks until every block weight is at
/// most its bound. Labels, ghost labels and block weights of `partition` are
/// updated in place on all PEs.
inline BalancerResult
rebalance(const DistGraph &graph, Partition &partition, msg::PEGroup &group, const BalancerConfig &config = {}) {
  expects(config.candidates_per_block >= 1, "need at least one candidate per block");
  return detail::Balancer(graph, partition, group, config).run();
}

} // namespace dkmp
