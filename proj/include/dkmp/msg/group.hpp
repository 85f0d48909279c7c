/*******************************************************************************
 * PE groups and the collective operations built on Channel::exchange.
 *
 * All collectives are bulk-synchronous: every member of a group calls them in
 * the same order. Results only depend on the inputs and the group, never on
 * thread timing, because data is always combined in rank order.
 *
 * @file:   group.hpp
 ******************************************************************************/
#pragma once

#include <algorithm>
#include <cstring>
#include <memory>
#include <span>
#include <type_traits>
#include <vector>

#include "dkmp/msg/transport.hpp"

namespace dkmp::msg {

enum class AllToAllMode : std::uint8_t { kDirect, kGrid };

template <typename T>
concept Record = std::is_trivially_copyable_v<T>;

template <Record T> Buffer pack(std::span<const T> records) {
  Buffer buffer(records.size_bytes());
  if (!records.empty()) {
    std::memcpy(buffer.data(), records.data(), records.size_bytes());
  }
  return buffer;
}

template <Record T> std::vector<T> unpack(const Buffer &buffer) {
  expects(buffer.size() % sizeof(T) == 0, "buffer size is not a multiple of the record size");
  std::vector<T> records(buffer.size() / sizeof(T));
  if (!records.empty()) {
    std::memcpy(records.data(), buffer.data(), buffer.size());
  }
  return records;
}

class PEGroup {
public:
  PEGroup(
      std::shared_ptr<Channel> channel,
      std::shared_ptr<World> world,
      const int rank,
      const int world_first,
      const AllToAllMode mode = AllToAllMode::kGrid
  )
      : _channel(std::move(channel)),
        _world(std::move(world)),
        _rank(rank),
        _world_first(world_first),
        _mode(mode) {}

  [[nodiscard]] int size() const {
    return _channel->size();
  }
  [[nodiscard]] int rank() const {
    return _rank;
  }
  [[nodiscard]] bool is_root() const {
    return _rank == 0;
  }

  /// World rank of this group's rank 0; member ranks are contiguous from here.
  [[nodiscard]] int world_first() const {
    return _world_first;
  }
  [[nodiscard]] int world_rank() const {
    return _world_first + _rank;
  }

  /// Routing used by algorithms for their sparse all-to-all rounds.
  [[nodiscard]] AllToAllMode mode() const {
    return _mode;
  }

  [[nodiscard]] std::uint64_t calls() const {
    return _calls;
  }

  [[nodiscard]] Trace &trace() const {
    return _world->trace;
  }

  [[nodiscard]] const std::shared_ptr<World> &world() const {
    return _world;
  }

  /// Raw personalized exchange with trace accounting. Throws
  /// ContractViolation on all members if any member passes `local_error`.
  std::vector<Buffer>
  exchange(const Collective kind, std::vector<Buffer> outgoing, const bool local_error = false) {
    const CallMeta meta{.index = _calls++, .kind = kind, .error = local_error};
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
    for (int pe = 0; pe < size(); ++pe) {
      if (pe != _rank && !outgoing[pe].empty()) {
        ++messages;
        bytes += outgoing[pe].size();
      }
    }
    if (_rank == 0) {
      trace().record_phase(kind);
    }
    trace().record_send(kind, messages, bytes);

    auto result = _channel->exchange(_rank, std::move(outgoing), meta);
    if (result.any_error) {
      throw ContractViolation(std::string("contract violation reported during ") + collective_name(kind));
    }
    return std::move(result.incoming);
  }

  void barrier() {
    record_call(Collective::kBarrier);
    exchange(Collective::kBarrier, std::vector<Buffer>(size()));
  }

  /// Sub-group of this PE after splitting into `parts` contiguous groups.
  [[nodiscard]] PEGroup split(const int parts) {
    // Every member evaluates the same condition, so all of them throw.
    expects(parts >= 1 && size() % parts == 0, "split: parts must divide the group size");
    record_call(Collective::kSplit);
    if (parts == 1) {
      return *this;
    }
    const CallMeta meta{.index = _calls++, .kind = Collective::kSplit};
    auto child = _channel->split(_rank, parts, meta);
    const int sub_size = size() / parts;
    return {std::move(child), _world, _rank % sub_size, _world_first + (_rank / sub_size) * sub_size, _mode};
  }

  void record_call(const Collective kind) {
    if (_rank == 0) {
      trace().record_call(kind);
    }
  }

private:
  std::shared_ptr<Channel> _channel;
  std::shared_ptr<World> _world;
  int _rank;
  int _world_first;
  AllToAllMode _mode;
  std::uint64_t _calls = 0;
};

//
// Collectives
//

template <Record T> std::vector<std::vector<T>> allgather(PEGroup &group, std::span<const T> local) {
  group.record_call(Collective::kAllgather);
  const Buffer mine = pack(local);
  std::vector<Buffer> out(group.size(), mine);
  auto in = group.exchange(Collective::kAllgather, std::move(out));
  std::vector<std::vector<T>> result(group.size());
  for (int pe = 0; pe < group.size(); ++pe) {
    result[pe] = unpack<T>(in[pe]);
  }
  return result;
}

template <Record T> std::vector<T> allgather_one(PEGroup &group, const T &value) {
  auto lists = allgather<T>(group, std::span<const T>(&value, 1));
  std::vector<T> result;
  result.reserve(lists.size());
  for (const auto &list : lists) {
    result.push_back(list.front());
  }
  return result;
}

/// Concatenation of all members' lists in rank order.
template <Record T> std::vector<T> allgatherv(PEGroup &group, std::span<const T> local) {
  auto lists = allgather<T>(group, local);
  std::vector<T> result;
  for (auto &list : lists) {
    result.insert(result.end(), list.begin(), list.end());
  }
  return result;
}

/// Elementwise sum; identical on every member.
template <typename T = Weight> std::vector<T> allreduce_sum(PEGroup &group, std::span<const T> values) {
  static_assert(std::is_arithmetic_v<T>);
  group.record_call(Collective::kAllreduce);
  const Buffer mine = pack(values);
  std::vector<Buffer> out(group.size(), mine);
  auto in = group.exchange(Collective::kAllreduce, std::move(out));

  std::vector<T> result(values.size(), T{});
  bool mismatch = false;
  for (int pe = 0; pe < group.size(); ++pe) {
    const auto theirs = unpack<T>(in[pe]);
    if (theirs.size() != values.size()) {
      mismatch = true;
      continue;
    }
    for (std::size_t i = 0; i < theirs.size(); ++i) {
      result[i] += theirs[i];
    }
  }
  // Every member sees the same sizes, so all of them throw together.
  expects(!mismatch, "allreduce_sum: vector length differs between PEs");
  return result;
}

template <typename T> T allreduce_sum(PEGroup &group, const T value) {
  return allreduce_sum<T>(group, std::span<const T>(&value, 1)).front();
}

template <typename T> T allreduce_max(PEGroup &group, const T value) {
  const auto values = allgather_one<T>(group, value);
  return *std::max_element(values.begin(), values.end());
}

inline bool allreduce_or(PEGroup &group, const bool value) {
  return allreduce_sum<std::int64_t>(group, value ? 1 : 0) > 0;
}

template <Record T> std::vector<T> broadcast(PEGroup &group, std::span<const T> data, const int root = 0) {
  group.record_call(Collective::kBroadcast);
  std::vector<Buffer> out(group.size());
  if (group.rank() == root) {
    const Buffer mine = pack(data);
    for (int pe = 0; pe < group.size(); ++pe) {
      out[pe] = mine;
    }
  }
  auto in = group.exchange(Collective::kBroadcast, std::move(out));
  return unpack<T>(in[root]);
}

/// Binary-tree reduction towards rank 0. In the round with stride s, rank r
/// with r mod 2s == s ships its list to r - s, which computes
/// merge(own, received). The tree shape is fixed, so the result is
/// deterministic. Only rank 0 holds the result; other ranks get an empty list.
template <Record T, typename Merge>
std::vector<T> tree_reduce(PEGroup &group, std::vector<T> local, Merge &&merge) {
  group.record_call(Collective::kTreeReduce);
  const int rank = group.rank();
  bool active = true;
  for (int stride = 1; stride < group.size(); stride *= 2) {
    std::vector<Buffer> out(group.size());
    if (active && rank % (2 * stride) == stride) {
      out[rank - stride] = pack<T>(local);
      active = false;
    }
    auto in = group.exchange(Collective::kTreeReduce, std::move(out));
    if (active && rank % (2 * stride) == 0 && rank + stride < group.size()) {
      local = merge(std::move(local), unpack<T>(in[rank + stride]));
    }
  }
  if (rank != 0) {
    local.clear();
  }
  return local;
}

} // namespace dkmp::msg
