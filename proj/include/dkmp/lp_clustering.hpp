/*******************************************************************************
 * Size-constrained label propagation clustering on a distributed graph.
 *
 * Cluster IDs are global IDs of the cluster's initial vertex; the PE owning
 * that vertex tracks the cluster's global weight for the whole run. After
 * every batch, PEs ship per-cluster weight deltas to the owners. Clusters
 * that ended up heavier than W are repaired by reverting moves on the PEs
 * that contributed weight, proportionally to their contribution.
 *
 * @file:   lp_clustering.hpp
 ******************************************************************************/
#pragma once

#include <unordered_map>
#include <vector>

#include "dkmp/chunk_schedule.hpp"
#include "dkmp/dist_graph.hpp"
#include "dkmp/msg/sparse_alltoall.hpp"
#include "dkmp/rating_map.hpp"

namespace dkmp {

struct ClusteringConfig {
  int iterations = 3;
  std::size_t alpha = 8;
  std::size_t beta = 128;
  LocalID chunk_size = kDefaultChunkSize;
};

struct Clustering {
  std::vector<GlobalID> labels;
  /// Tracked global weight of the cluster rooted at each owned vertex.
  std::vector<Weight> owned_cluster_weights;
  Weight max_cluster_weight = 0;
  std::uint64_t moves = 0;
  std::uint64_t reverted_moves = 0;
};

/// W = eps * c(V) / k' with k' = min{k, max{1, n / C}}, at least 1.
inline Weight max_cluster_weight(
    const Weight total_weight, const GlobalID n, const BlockID k, const GlobalID contraction_limit, const double eps
) {
  expects(contraction_limit >= 1, "contraction limit must be positive");
  const GlobalID k_prime = std::min<GlobalID>(k, std::max<GlobalID>(1, n / contraction_limit));
  const __int128 num = static_cast<__int128>(epsilon_to_ppm(eps)) * total_weight;
  const __int128 den = static_cast<__int128>(k_prime) * kEpsilonScale;
  return std::max<Weight>(1, static_cast<Weight>(num / den));
}

/// Weight each contributor has to shed from an overweight cluster:
/// ceil(overload * contrib_i / sum(contrib)).
inline std::vector<Weight> shed_amounts(const Weight overload, std::span<const Weight> contributions) {
  __int128 total = 0;
  for (const Weight c : contributions) {
    total += c;
  }
  std::vector<Weight> shed(contributions.size(), 0);
  if (overload <= 0 || total == 0) {
    return shed;
  }
  for (std::size_t i = 0; i < contributions.size(); ++i) {
    shed[i] = detail::ceil_div(static_cast<__int128>(overload) * contributions[i], total);
  }
  return shed;
}

namespace detail {

struct ClusterDelta {
  GlobalID cluster;
  Weight delta;
  Weight contribution;
};

struct ClusterReply {
  GlobalID cluster;
  Weight weight;
  Weight shed;
};

struct LabelUpdate {
  GlobalID label;
  Weight label_weight;
};

class LPClusterer {
public:
  LPClusterer(const DistGraph &graph, msg::PEGroup &group, const Weight max_weight, const ClusteringConfig &config)
      : _graph(graph),
        _group(group),
        _config(config) {
    _result.max_cluster_weight = max_weight;
    _result.labels.resize(graph.n_total());
    _result.owned_cluster_weights.resize(graph.n_owned());
    _view.reserve(graph.n_total());
    for (LocalID u = 0; u < graph.n_total(); ++u) {
      const GlobalID gid = graph.local_to_global(u);
      _result.labels[u] = gid;
      _view[gid] = graph.vertex_weight(u);
      if (graph.is_owned(u)) {
        _result.owned_cluster_weights[u] = graph.vertex_weight(u);
      }
    }
  }

  Clustering run(const std::uint64_t seed) {
    const std::size_t batches = batch_count(_group.size(), _config.alpha, _config.beta);
    for (int iteration = 0; iteration < _config.iterations; ++iteration) {
      const ChunkSchedule schedule(
          _graph, _config.chunk_size, mix_seed(seed, {static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(_group.rank())})
      );
      for (std::size_t b = 0; b < batches; ++b) {
        const auto [begin, end] = schedule.batch(b, batches);
        process_batch(std::span(schedule.order()).subspan(begin, end - begin));
      }
    }
    return std::move(_result);
  }

private:
  struct Move {
    LocalID u;
    GlobalID from;
    GlobalID to;
    bool reverted;
  };

  struct PendingDelta {
    Weight delta = 0;
    Weight contribution = 0;
  };

  Weight &view(const GlobalID cluster) {
    return _view.try_emplace(cluster, 0).first->second;
  }

  void process_batch(std::span<const LocalID> vertices) {
    _moves.clear();
    _pending.clear();
    const Weight max_weight = _result.max_cluster_weight;
    auto &labels = _result.labels;

    for (const LocalID u : vertices) {
      const GlobalID current = labels[u];
      const Weight weight = _graph.vertex_weight(u);
      _ratings.reset(_graph.degree(u));
      _graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) { _ratings.add(labels[v], w); });

      const Weight current_rating = _ratings.get(current);
      GlobalID best = current;
      Weight best_rating = current_rating;
      Weight best_weight = 0;
      _ratings.for_each([&](const GlobalID cluster, const Weight rating) {
        if (cluster == current || rating <= current_rating || rating < best_rating) {
          return;
        }
        const Weight cluster_weight = view(cluster);
        if (cluster_weight + weight > max_weight) {
          return;
        }
        const bool better = best == current || rating > best_rating || cluster_weight < best_weight ||
                            (cluster_weight == best_weight && cluster < best);
        if (better) {
          best = cluster;
          best_rating = rating;
          best_weight = cluster_weight;
        }
      });

      if (best != current) {
        labels[u] = best;
        view(current) -= weight;
        view(best) += weight;
        _pending[current].delta -= weight;
        auto &target = _pending[best];
        target.delta += weight;
        target.contribution += weight;
        _moves_into[best].push_back(_moves.size());
        _moves.push_back({u, current, best, false});
      }
    }

    reconcile();
    sync_labels();
    _moves_into.clear();
  }

  /// Rounds of delta submission and proportional reverting until no PE has
  /// to revert anything.
  void reconcile() {
    while (true) {
      std::vector<std::vector<ClusterDelta>> out(_group.size());
      for (const auto &[cluster, pending] : _pending) {
        if (pending.delta != 0 || pending.contribution > 0) {
          out[owner_of(_graph.vtxdist(), cluster)].push_back({cluster, pending.delta, pending.contribution});
        }
      }
      for (auto &[cluster, pending] : _pending) {
        pending.delta = 0;
      }
      const auto in = msg::sparse_all_to_all(_group, out);
      const auto replies = msg::sparse_all_to_all(_group, answer(in));

      bool reverted = false;
      for (const auto &list : replies) {
        for (const auto &[cluster, weight, shed] : list) {
          view(cluster) = weight;
          if (shed > 0) {
            reverted |= revert(cluster, shed);
          }
        }
      }
      if (!msg::allreduce_or(_group, reverted)) {
        break;
      }
    }
  }

  std::vector<std::vector<ClusterReply>> answer(const std::vector<std::vector<ClusterDelta>> &in) {
    struct Contribution {
      int pe;
      Weight amount;
    };
    std::unordered_map<GlobalID, std::vector<Contribution>> contributors;
    std::vector<GlobalID> touched;
    for (int pe = 0; pe < _group.size(); ++pe) {
      for (const auto &[cluster, delta, contribution] : in[pe]) {
        const LocalID local = static_cast<LocalID>(cluster - _graph.offset());
        _result.owned_cluster_weights[local] += delta;
        auto &list = contributors[cluster];
        if (list.empty()) {
          touched.push_back(cluster);
        }
        list.push_back({pe, contribution});
      }
    }

    std::vector<std::vector<ClusterReply>> out(_group.size());
    std::vector<Weight> amounts;
    for (const GlobalID cluster : touched) {
      const auto &list = contributors[cluster];
      const Weight weight = _result.owned_cluster_weights[cluster - _graph.offset()];
      amounts.clear();
      for (const auto &c : list) {
        amounts.push_back(c.amount);
      }
      const auto shed = shed_amounts(weight - _result.max_cluster_weight, amounts);
      for (std::size_t i = 0; i < list.size(); ++i) {
        out[list[i].pe].push_back({cluster, weight, shed[i]});
      }
    }
    return out;
  }

  /// Reverts the most recent moves into `cluster` until `shed` weight is gone.
  bool revert(const GlobalID cluster, Weight shed) {
    auto it = _moves_into.find(cluster);
    if (it == _moves_into.end()) {
      return false;
    }
    bool any = false;
    auto &indices = it->second;
    while (shed > 0 && !indices.empty()) {
      Move &move = _moves[indices.back()];
      indices.pop_back();
      if (move.reverted) {
        continue;
      }
      const Weight weight = _graph.vertex_weight(move.u);
      move.reverted = true;
      _result.labels[move.u] = move.from;
      view(cluster) -= weight;
      view(move.from) += weight;
      auto &pending = _pending[cluster];
      pending.delta -= weight;
      pending.contribution -= weight;
      _pending[move.from].delta += weight;
      shed -= weight;
      ++_result.reverted_moves;
      any = true;
    }
    return any;
  }

  void sync_labels() {
    std::vector<LocalID> changed;
    for (const Move &move : _moves) {
      if (!move.reverted) {
        ++_result.moves;
      }
      if (_graph.is_interface(move.u)) {
        changed.push_back(move.u);
      }
    }
    sync_ghosts<LabelUpdate>(
        _graph,
        _group,
        changed,
        [&](const LocalID u) {
          const GlobalID label = _result.labels[u];
          return LabelUpdate{label, view(label)};
        },
        [&](const LocalID ghost, const LabelUpdate &update) {
          _result.labels[ghost] = update.label;
          view(update.label) = update.label_weight;
        }
    );
  }

  const DistGraph &_graph;
  msg::PEGroup &_group;
  ClusteringConfig _config;
  Clustering _result;

  std::unordered_map<GlobalID, Weight> _view;
  std::unordered_map<GlobalID, PendingDelta> _pending;
  std::unordered_map<GlobalID, std::vector<std::size_t>> _moves_into;
  std::vector<Move> _moves;
  RatingMap<GlobalID> _ratings;
};

} // namespace detail

/// Clustering with an explicit maximum cluster weight.
inline Clustering cluster_with_limit(
    const DistGraph &graph,
    msg::PEGroup &group,
    const Weight max_weight,
    const ClusteringConfig &config,
    const std::uint64_t seed
) {
  expects(config.iterations >= 1, "clustering needs at least one iteration");
  return detail::LPClusterer(graph, group, max_weight, config).run(seed);
}

inline Clustering cluster(
    const DistGraph &graph,
    msg::PEGroup &group,
    const BlockID k,
    const GlobalID contraction_limit,
    const double eps,
    const ClusteringConfig &config,
    const std::uint64_t seed
) {
  const Weight max_weight =
      max_cluster_weight(graph.total_weight(), graph.global_n(), k, contraction_limit, eps);
  return cluster_with_limit(graph, group, max_weight, config, seed);
}

/// Recounts every cluster's weight at its owner and compares it with the
/// tracked value. True on all PEs iff every tracked weight is exact and no
/// cluster with more than one member exceeds W.
inline bool verify_cluster_weights(const DistGraph &graph, msg::PEGroup &group, const Clustering &clustering) {
  struct Member {
    GlobalID cluster;
    Weight weight;
  };
  std::vector<std::vector<Member>> out(group.size());
  for (LocalID u = 0; u < graph.n_owned(); ++u) {
    const GlobalID c = clustering.labels[u];
    out[owner_of(graph.vtxdist(), c)].push_back({c, graph.vertex_weight(u)});
  }
  const auto in = msg::sparse_all_to_all(group, out);
  std::vector<Weight> actual(graph.n_owned(), 0);
  std::vector<LocalID> members(graph.n_owned(), 0);
  for (const auto &list : in) {
    for (const auto &[c, w] : list) {
      actual[c - graph.offset()] += w;
      ++members[c - graph.offset()];
    }
  }
  bool ok = true;
  for (LocalID u = 0; u < graph.n_owned(); ++u) {
    ok &= actual[u] == clustering.owned_cluster_weights[u];
    ok &= members[u] <= 1 || actual[u] <= clustering.max_cluster_weight;
  }
  return !msg::allreduce_or(group, !ok);
}

} // namespace dkmp
