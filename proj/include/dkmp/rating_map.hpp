/*******************************************************************************
 * Open-addressing accumulator for neighbor ratings, cleared in time
 * proportional to the number of touched keys.
 *
 * @file:   rating_map.hpp
 ******************************************************************************/
#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "dkmp/random.hpp"
#include "dkmp/types.hpp"

namespace dkmp {

template <typename Key> class RatingMap {
public:
  /// Prepares the table for at most `max_keys` distinct keys.
  void reset(const std::size_t max_keys) {
    for (const std::size_t slot : _used) {
      _slots[slot].occupied = false;
    }
    _used.clear();
    const std::size_t wanted = std::bit_ceil(std::max<std::size_t>(4, 2 * max_keys));
    if (wanted > _slots.size()) {
      _slots.assign(wanted, {});
    }
    _mask = _slots.size() - 1;
  }

  void add(const Key key, const Weight value) {
    std::size_t slot = static_cast<std::size_t>(splitmix64(static_cast<std::uint64_t>(key))) & _mask;
    while (_slots[slot].occupied && _slots[slot].key != key) {
      slot = (slot + 1) & _mask;
    }
    if (!_slots[slot].occupied) {
      _slots[slot] = {key, 0, true};
      _used.push_back(slot);
    }
    _slots[slot].value += value;
  }

  [[nodiscard]] Weight get(const Key key) const {
    std::size_t slot = static_cast<std::size_t>(splitmix64(static_cast<std::uint64_t>(key))) & _mask;
    while (_slots[slot].occupied) {
      if (_slots[slot].key == key) {
        return _slots[slot].value;
      }
      slot = (slot + 1) & _mask;
    }
    return 0;
  }

  /// Visits entries in insertion order.
  template <typename Lambda> void for_each(Lambda &&l) const {
    for (const std::size_t slot : _used) {
      l(_slots[slot].key, _slots[slot].value);
    }
  }

  [[nodiscard]] std::size_t size() const {
    return _used.size();
  }

private:
  struct Slot {
    Key key{};
    Weight value = 0;
    bool occupied = false;
  };

  std::vector<Slot> _slots;
  std::vector<std::size_t> _used;
  std::size_t _mask = 0;
};

} // namespace dkmp
