/*******************************************************************************
 * Sparse all-to-all: direct and two-level grid routing.
 *
 * In grid mode, PEs are arranged in a grid with ceil(sqrt(P)) columns and
 * rank = row * columns + col; the last row may be short. A record from
 * (row_s, col_s) to (row_d, col_d) first travels within the source column to
 * (row_d, col_s) and then within row row_d to its destination. If (row_d,
 * col_s) falls into the missing part of a short last row, the record travels
 * within the source row to (row_s, col_d) instead and then within column
 * col_d. Each PE thus talks to O(sqrt(P)) peers per phase.
 *
 * @file:   sparse_alltoall.hpp
 ******************************************************************************/
#pragma once

#include <cmath>
#include <cstring>
#include <span>
#include <vector>

#include "dkmp/msg/group.hpp"

namespace dkmp::msg {

struct GridShape {
  int size;
  int columns;

  explicit GridShape(const int pes) : size(pes), columns(1) {
    while (columns * columns < pes) {
      ++columns;
    }
  }

  [[nodiscard]] int row(const int pe) const {
    return pe / columns;
  }
  [[nodiscard]] int column(const int pe) const {
    return pe % columns;
  }
  [[nodiscard]] int rank(const int r, const int c) const {
    return r * columns + c;
  }

  /// PE that forwards records from `from` to `to`.
  [[nodiscard]] int intermediate(const int from, const int to) const {
    const int via = rank(row(to), column(from));
    if (via < size) {
      return via;
    }
    return rank(row(from), column(to));
  }
};

namespace detail {
struct SectionHeader {
  std::uint32_t pe;
  std::uint32_t bytes;
};

inline void append_section(Buffer &buffer, const std::uint32_t pe, const std::byte *data, const std::size_t len) {
  const SectionHeader header{pe, static_cast<std::uint32_t>(len)};
  const std::size_t offset = buffer.size();
  buffer.resize(offset + sizeof(SectionHeader) + len);
  std::memcpy(buffer.data() + offset, &header, sizeof(SectionHeader));
  if (len > 0) {
    std::memcpy(buffer.data() + offset + sizeof(SectionHeader), data, len);
  }
}

template <typename Lambda> void for_each_section(const Buffer &buffer, Lambda &&l) {
  std::size_t pos = 0;
  while (pos < buffer.size()) {
    SectionHeader header{};
    std::memcpy(&header, buffer.data() + pos, sizeof(SectionHeader));
    pos += sizeof(SectionHeader);
    l(header.pe, buffer.data() + pos, static_cast<std::size_t>(header.bytes));
    pos += header.bytes;
  }
}

inline std::vector<Buffer> grid_exchange(PEGroup &group, std::vector<Buffer> outgoing) {
  const int size = group.size();
  const int rank = group.rank();
  const GridShape grid(size);

  // Phase 1: bundle records per intermediate PE, tagged with the final
  // destination.
  std::vector<Buffer> phase1(size);
  for (int dst = 0; dst < size; ++dst) {
    if (outgoing[dst].empty()) {
      continue;
    }
    const int via = grid.intermediate(rank, dst);
    append_section(phase1[via], static_cast<std::uint32_t>(dst), outgoing[dst].data(), outgoing[dst].size());
  }
  outgoing.clear();
  auto received1 = group.exchange(Collective::kSparseGrid, std::move(phase1));

  // Phase 2: forward to the final destination, tagged with the origin. Origins
  // are visited in rank order, so per-(origin, destination) order is kept.
  std::vector<Buffer> phase2(size);
  for (int origin = 0; origin < size; ++origin) {
    for_each_section(received1[origin], [&](const std::uint32_t dst, const std::byte *data, const std::size_t len) {
      append_section(phase2[dst], static_cast<std::uint32_t>(origin), data, len);
    });
  }
  received1.clear();
  auto received2 = group.exchange(Collective::kSparseGrid, std::move(phase2));

  std::vector<Buffer> incoming(size);
  for (int via = 0; via < size; ++via) {
    for_each_section(received2[via], [&](const std::uint32_t origin, const std::byte *data, const std::size_t len) {
      incoming[origin].insert(incoming[origin].end(), data, data + len);
    });
  }
  return incoming;
}
} // namespace detail

/// Delivers `per_destination[pe]` to PE `pe`; returns the records received
/// from each source rank. The received multiset is identical in both modes.
template <Record T>
std::vector<std::vector<T>> sparse_all_to_all(
    PEGroup &group, const std::vector<std::vector<T>> &per_destination, const AllToAllMode mode
) {
  const Collective kind = mode == AllToAllMode::kGrid ? Collective::kSparseGrid : Collective::kSparseDirect;
  group.record_call(kind);

  const bool bad_size = static_cast<int>(per_destination.size()) > group.size();
  std::vector<Buffer> outgoing(group.size());
  if (!bad_size) {
    for (std::size_t pe = 0; pe < per_destination.size(); ++pe) {
      outgoing[pe] = pack<T>(per_destination[pe]);
    }
  }

  std::vector<Buffer> incoming;
  if (bad_size) {
    // Still take part so that every member learns about the violation.
    group.exchange(kind, std::vector<Buffer>(group.size()), true);
  } else if (mode == AllToAllMode::kGrid && group.size() > 1) {
    incoming = detail::grid_exchange(group, std::move(outgoing));
  } else {
    incoming = group.exchange(kind, std::move(outgoing));
  }

  std::vector<std::vector<T>> result(group.size());
  for (int pe = 0; pe < group.size(); ++pe) {
    result[pe] = unpack<T>(incoming[pe]);
  }
  return result;
}

/// Record-level addressing: destinations outside the group are reported as a
/// contract violation on every member.
template <Record T> class MessageBatch {
public:
  explicit MessageBatch(const int group_size) : _buffers(group_size) {}

  void push(const int pe, const T &record) {
    if (pe < 0 || pe >= static_cast<int>(_buffers.size())) {
      _bad_destination = true;
      return;
    }
    _buffers[pe].push_back(record);
  }

  [[nodiscard]] bool bad_destination() const {
    return _bad_destination;
  }

  std::vector<std::vector<T>> &buffers() {
    return _buffers;
  }

private:
  std::vector<std::vector<T>> _buffers;
  bool _bad_destination = false;
};

template <Record T>
std::vector<std::vector<T>> sparse_all_to_all(PEGroup &group, MessageBatch<T> &batch, const AllToAllMode mode) {
  if (batch.bad_destination()) {
    const Collective kind = mode == AllToAllMode::kGrid ? Collective::kSparseGrid : Collective::kSparseDirect;
    group.record_call(kind);
    group.exchange(kind, std::vector<Buffer>(group.size()), true);
  }
  // Other members may have flagged a violation; their exchange throws here.
  return sparse_all_to_all<T>(group, batch.buffers(), mode);
}

template <Record T>
std::vector<std::vector<T>> sparse_all_to_all(PEGroup &group, const std::vector<std::vector<T>> &per_destination) {
  return sparse_all_to_all<T>(group, per_destination, group.mode());
}

} // namespace dkmp::msg
