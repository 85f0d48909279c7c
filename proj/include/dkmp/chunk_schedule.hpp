/*******************************************************************************
 * Vertex traversal order for label propagation.
 *
 * Owned vertices are grouped into exponentially spaced degree buckets (bucket
 * 0 holds degrees 0 and 1, bucket i >= 1 holds 2^i <= deg < 2^(i+1)).
 * Buckets are visited in increasing order. Each bucket is cut into chunks;
 * chunks are shuffled within their bucket and vertices within their chunk.
 *
 * @file:   chunk_schedule.hpp
 ******************************************************************************/
#pragma once

#include <bit>
#include <vector>

#include "dkmp/random.hpp"
#include "dkmp/types.hpp"

namespace dkmp {

inline constexpr LocalID kDefaultChunkSize = 1024;

inline int degree_bucket(const LocalID degree) {
  return degree <= 1 ? 0 : std::bit_width(degree) - 1;
}

class ChunkSchedule {
public:
  template <typename Graph>
  ChunkSchedule(const Graph &graph, const LocalID chunk_size, const std::uint64_t seed) {
    expects(chunk_size >= 1, "chunk size must be positive");
    const LocalID n = graph.n_owned();

    std::vector<std::vector<LocalID>> buckets;
    for (LocalID u = 0; u < n; ++u) {
      const auto bucket = static_cast<std::size_t>(degree_bucket(graph.degree(u)));
      if (bucket >= buckets.size()) {
        buckets.resize(bucket + 1);
      }
      buckets[bucket].push_back(u);
    }

    Random rng(seed);
    _order.reserve(n);
    for (auto &bucket : buckets) {
      const std::size_t num_chunks = (bucket.size() + chunk_size - 1) / chunk_size;
      std::vector<std::size_t> chunks(num_chunks);
      for (std::size_t c = 0; c < num_chunks; ++c) {
        chunks[c] = c;
      }
      rng.shuffle(std::span(chunks));
      for (const std::size_t c : chunks) {
        const std::size_t begin = c * chunk_size;
        const std::size_t end = std::min(bucket.size(), begin + chunk_size);
        std::span chunk(bucket.data() + begin, end - begin);
        rng.shuffle(chunk);
        _chunk_sizes.push_back(static_cast<LocalID>(chunk.size()));
        _order.insert(_order.end(), chunk.begin(), chunk.end());
      }
      _bucket_sizes.push_back(static_cast<LocalID>(bucket.size()));
    }
  }

  [[nodiscard]] const std::vector<LocalID> &order() const {
    return _order;
  }
  [[nodiscard]] const std::vector<LocalID> &bucket_sizes() const {
    return _bucket_sizes;
  }
  [[nodiscard]] const std::vector<LocalID> &chunk_sizes() const {
    return _chunk_sizes;
  }

  /// Bounds of batch `b` out of `num_batches` equal slices of the order.
  [[nodiscard]] std::pair<std::size_t, std::size_t> batch(const std::size_t b, const std::size_t num_batches) const {
    const std::size_t n = _order.size();
    return {n * b / num_batches, n * (b + 1) / num_batches};
  }

private:
  std::vector<LocalID> _order;
  std::vector<LocalID> _bucket_sizes;
  std::vector<LocalID> _chunk_sizes;
};

/// Number of vertex batches per label propagation iteration:
/// max{alpha, ceil(beta / P)}.
inline std::size_t batch_count(const int pes, const std::size_t alpha, const std::size_t beta) {
  expects(pes >= 1, "need at least one PE");
  const auto p = static_cast<std::size_t>(pes);
  return std::max(alpha, (beta + p - 1) / p);
}

} // namespace dkmp
