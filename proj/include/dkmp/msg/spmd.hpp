/*******************************************************************************
 * Runs a function on P logical PEs, one thread per PE.
 *
 * @file:   spmd.hpp
 ******************************************************************************/
#pragma once

#include <exception>
#include <functional>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

#include "dkmp/msg/group.hpp"

namespace dkmp::msg {

struct SpmdOptions {
  std::shared_ptr<Transport> transport = std::make_shared<InProcessTransport>();
  std::shared_ptr<World> world = std::make_shared<World>();
  AllToAllMode mode = AllToAllMode::kGrid;
};

/// Calls fn(group) on every PE and returns the per-PE results in rank order.
/// If a PE throws, the others are released from their collectives and the
/// first non-secondary exception is rethrown.
template <typename Fn>
auto run_spmd(const int pes, Fn &&fn, SpmdOptions options = {}) {
  using Result = std::invoke_result_t<Fn &, PEGroup &>;
  expects(pes >= 1, "need at least one PE");

  auto channel = options.transport->create(options.world, pes);
  std::vector<std::exception_ptr> errors(pes);
  std::vector<char> secondary(pes, 0);

  constexpr bool kVoid = std::is_void_v<Result>;
  using Slot = std::conditional_t<kVoid, char, std::optional<Result>>;
  std::vector<Slot> results(pes);

  auto body = [&](const int rank) {
    PEGroup group(channel, options.world, rank, 0, options.mode);
    try {
      if constexpr (kVoid) {
        fn(group);
      } else {
        results[rank].emplace(fn(group));
      }
    } catch (const Aborted &) {
      errors[rank] = std::current_exception();
      secondary[rank] = 1;
    } catch (...) {
      errors[rank] = std::current_exception();
      options.world->aborted = true;
    }
  };

  if (pes == 1) {
    body(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(pes);
    for (int rank = 0; rank < pes; ++rank) {
      threads.emplace_back(body, rank);
    }
    for (auto &thread : threads) {
      thread.join();
    }
  }

  for (int rank = 0; rank < pes; ++rank) {
    if (errors[rank] && !secondary[rank]) {
      std::rethrow_exception(errors[rank]);
    }
  }
  for (int rank = 0; rank < pes; ++rank) {
    if (errors[rank]) {
      std::rethrow_exception(errors[rank]);
    }
  }

  if constexpr (!kVoid) {
    std::vector<Result> out;
    out.reserve(pes);
    for (auto &slot : results) {
      out.push_back(std::move(*slot));
    }
    return out;
  }
}

} // namespace dkmp::msg
