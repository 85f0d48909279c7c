/*******************************************************************************
 * Seed derivation and a portable shuffle.
 *
 * std::shuffle and the std distributions are implementation defined; results
 * must not depend on the standard library, so randomness goes through these
 * helpers.
 *
 * @file:   random.hpp
 ******************************************************************************/
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace dkmp {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> salts) {
  std::uint64_t h = splitmix64(seed);
  for (const std::uint64_t salt : salts) {
    h = splitmix64(h ^ salt);
  }
  return h;
}

class Random {
public:
  explicit Random(const std::uint64_t seed) : _engine(seed) {}

  std::uint64_t next() {
    return _engine();
  }

  /// Uniform in [0, bound).
  std::uint64_t below(const std::uint64_t bound) {
    return _engine() % bound;
  }

  bool coin() {
    return (_engine() >> 63) != 0;
  }

  /// Uniform in [0, 1).
  double real() {
    return static_cast<double>(_engine() >> 11) * 0x1.0p-53;
  }

  template <typename T> void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

private:
  std::mt19937_64 _engine;
};

} // namespace dkmp
