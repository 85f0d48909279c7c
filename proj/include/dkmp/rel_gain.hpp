/*******************************************************************************
 * Relative gain of a balancing move: g * c(v) for g >= 0, g / c(v) otherwise.
 * Kept as an exact fraction; comparison cross-multiplies in 128 bit.
 *
 * @file:   rel_gain.hpp
 ******************************************************************************/
#pragma once

#include <compare>

#include "dkmp/types.hpp"

namespace dkmp {

struct RelGain {
  Weight num = 0;
  Weight den = 1; // always positive

  friend std::strong_ordering operator<=>(const RelGain &a, const RelGain &b) {
    const __int128 lhs = static_cast<__int128>(a.num) * b.den;
    const __int128 rhs = static_cast<__int128>(b.num) * a.den;
    return lhs <=> rhs;
  }

  friend bool operator==(const RelGain &a, const RelGain &b) {
    return (a <=> b) == 0;
  }
};

inline RelGain rel_gain(const Weight gain, const Weight vertex_weight) {
  expects(vertex_weight >= 1, "vertex weight must be positive");
  if (gain >= 0) {
    return {gain * vertex_weight, 1};
  }
  return {gain, vertex_weight};
}

} // namespace dkmp
