/*******************************************************************************
 * Transport layer of the message-passing kernel.
 *
 * A Channel connects the members of one PE group. The only primitive is a
 * bulk-synchronous personalized exchange: every member hands in one byte
 * buffer per destination and receives one buffer per source. All collectives
 * are built on top of it. The in-process implementation realizes PEs as
 * threads of one process; another backend only has to implement Channel and
 * Transport.
 *
 * @file:   transport.hpp
 ******************************************************************************/
#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dkmp/types.hpp"

namespace dkmp::msg {

using Buffer = std::vector<std::byte>;

enum class Collective : std::uint8_t {
  kSparseDirect,
  kSparseGrid,
  kAllgather,
  kAllreduce,
  kBroadcast,
  kTreeReduce,
  kSplit,
  kBarrier,
  kCount
};

inline const char *collective_name(const Collective c) {
  switch (c) {
  case Collective::kSparseDirect:
    return "sparse_all_to_all/direct";
  case Collective::kSparseGrid:
    return "sparse_all_to_all/grid";
  case Collective::kAllgather:
    return "allgather";
  case Collective::kAllreduce:
    return "allreduce";
  case Collective::kBroadcast:
    return "broadcast";
  case Collective::kTreeReduce:
    return "tree_reduce";
  case Collective::kSplit:
    return "split";
  case Collective::kBarrier:
    return "barrier";
  case Collective::kCount:
    break;
  }
  return "?";
}

struct CollectiveStats {
  std::uint64_t calls = 0;
  std::uint64_t phases = 0;
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  // Largest number of point-to-point messages a single PE sent in one phase.
  std::uint64_t max_pe_messages = 0;
};

/// Per-collective message counters. Only messages between distinct PEs are
/// counted; a PE handing data to itself is a local copy.
class Trace {
public:
  void record_call(const Collective c) {
    slot(c).calls.fetch_add(1, std::memory_order_relaxed);
  }

  void record_phase(const Collective c) {
    slot(c).phases.fetch_add(1, std::memory_order_relaxed);
  }

  void record_send(const Collective c, const std::uint64_t messages, const std::uint64_t bytes) {
    auto &s = slot(c);
    s.messages.fetch_add(messages, std::memory_order_relaxed);
    s.bytes.fetch_add(bytes, std::memory_order_relaxed);
    std::uint64_t prev = s.max_pe_messages.load(std::memory_order_relaxed);
    while (prev < messages &&
           !s.max_pe_messages.compare_exchange_weak(prev, messages, std::memory_order_relaxed)) {
    }
  }

  [[nodiscard]] CollectiveStats stats(const Collective c) const {
    const auto &s = _slots[static_cast<std::size_t>(c)];
    return {
        .calls = s.calls.load(),
        .phases = s.phases.load(),
        .messages = s.messages.load(),
        .bytes = s.bytes.load(),
        .max_pe_messages = s.max_pe_messages.load(),
    };
  }

  void reset() {
    for (auto &s : _slots) {
      s.calls = 0;
      s.phases = 0;
      s.messages = 0;
      s.bytes = 0;
      s.max_pe_messages = 0;
    }
  }

private:
  struct Slot {
    std::atomic<std::uint64_t> calls{0};
    std::atomic<std::uint64_t> phases{0};
    std::atomic<std::uint64_t> messages{0};
    std::atomic<std::uint64_t> bytes{0};
    std::atomic<std::uint64_t> max_pe_messages{0};
  };

  Slot &slot(const Collective c) {
    return _slots[static_cast<std::size_t>(c)];
  }

  std::array<Slot, static_cast<std::size_t>(Collective::kCount)> _slots;
};

/// Thrown on every PE still blocked in a collective after another PE failed.
class Aborted : public std::runtime_error {
public:
  Aborted() : std::runtime_error("SPMD execution aborted by another PE") {}
};

/// State shared by all PEs of one SPMD execution.
struct World {
  std::atomic<bool> aborted{false};
  Trace trace;
};

/// Identifies a collective call site for the schedule checker.
struct CallMeta {
  std::uint64_t index = 0;
  Collective kind = Collective::kBarrier;
  bool error = false;

  bool operator==(const CallMeta &other) const {
    return index == other.index && kind == other.kind;
  }
};

struct ExchangeResult {
  std::vector<Buffer> incoming;
  // Set on all members if any member flagged a local contract violation.
  bool any_error = false;
};

class Channel {
public:
  virtual ~Channel() = default;

  [[nodiscard]] virtual int size() const = 0;

  /// Personalized exchange. `outgoing` holds one buffer per group rank; the
  /// result holds one buffer per source rank. Every member must call this
  /// with the same `meta`, otherwise all members fail with ContractViolation.
  virtual ExchangeResult exchange(int rank, std::vector<Buffer> outgoing, const CallMeta &meta) = 0;

  /// Collective split into `parts` contiguous sub-channels of equal size.
  virtual std::shared_ptr<Channel> split(int rank, int parts, const CallMeta &meta) = 0;
};

class Transport {
public:
  virtual ~Transport() = default;
  virtual std::shared_ptr<Channel> create(std::shared_ptr<World> world, int size) = 0;
};

//
// In-process backend
//

class AbortableBarrier {
public:
  AbortableBarrier(const int count, std::shared_ptr<World> world)
      : _count(count),
        _world(std::move(world)) {}

  void arrive_and_wait() {
    std::unique_lock lock(_mutex);
    const std::uint64_t generation = _generation;
    if (++_arrived == _count) {
      _arrived = 0;
      ++_generation;
      _cv.notify_all();
      return;
    }
    while (_generation == generation) {
      if (_world->aborted.load()) {
        throw Aborted();
      }
      _cv.wait_for(lock, std::chrono::milliseconds(20));
    }
  }

private:
  int _count;
  std::shared_ptr<World> _world;
  std::mutex _mutex;
  std::condition_variable _cv;
  int _arrived = 0;
  std::uint64_t _generation = 0;
};

class InProcessChannel : public Channel {
public:
  InProcessChannel(std::shared_ptr<World> world, const int size)
      : _world(std::move(world)),
        _size(size),
        _barrier(size, _world),
        _outbox(size),
        _meta(size) {}

  [[nodiscard]] int size() const override {
    return _size;
  }

  ExchangeResult exchange(const int rank, std::vector<Buffer> outgoing, const CallMeta &meta) override {
    expects(static_cast<int>(outgoing.size()) == _size, "exchange needs one buffer per group member");
    if (_size == 1) {
      return {.incoming = std::move(outgoing), .any_error = meta.error};
    }

    _outbox[rank] = std::move(outgoing);
    _meta[rank] = meta;
    _barrier.arrive_and_wait();

    bool any_error = false;
    bool mismatch = false;
    for (int pe = 0; pe < _size; ++pe) {
      any_error |= _meta[pe].error;
      mismatch |= !(_meta[pe] == meta);
    }

    std::vector<Buffer> incoming(_size);
    if (!mismatch) {
      for (int pe = 0; pe < _size; ++pe) {
        incoming[pe] = std::move(_outbox[pe][rank]);
      }
    }
    _barrier.arrive_and_wait();

    if (mismatch) {
      throw ContractViolation(
          "collective schedule mismatch: PE " + std::to_string(rank) + " is at call " +
          std::to_string(meta.index) + " (" + collective_name(meta.kind) + ")"
      );
    }
    return {.incoming = std::move(incoming), .any_error = any_error};
  }

  std::shared_ptr<Channel> split(const int rank, const int parts, const CallMeta &meta) override {
    expects(parts >= 1 && _size % parts == 0, "split: parts must divide the group size");
    if (parts == 1) {
      return nullptr;
    }
    if (rank == 0) {
      _children.clear();
      for (int i = 0; i < parts; ++i) {
        _children.push_back(std::make_shared<InProcessChannel>(_world, _size / parts));
      }
    }
    // The exchange doubles as the schedule check and publishes _children.
    exchange(rank, std::vector<Buffer>(_size), meta);
    auto child = _children[rank / (_size / parts)];
    _barrier.arrive_and_wait();
    return child;
  }

private:
  std::shared_ptr<World> _world;
  int _size;
  AbortableBarrier _barrier;
  std::vector<std::vector<Buffer>> _outbox;
  std::vector<CallMeta> _meta;
  std::vector<std::shared_ptr<Channel>> _children;
};

class InProcessTransport : public Transport {
public:
  std::shared_ptr<Channel> create(std::shared_ptr<World> world, const int size) override {
    return std::make_shared<InProcessChannel>(std::move(world), size);
  }
};

} // namespace dkmp::msg
