/*******************************************************************************
 * Basic ID and weight types shared by all modules.
 *
 * Global IDs are 64 bit, local IDs 32 bit. Weights are signed 64 bit so that
 * gains and deltas can be expressed in the same type.
 *
 * @file:   types.hpp
 ******************************************************************************/
#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace dkmp {

using GlobalID = std::uint64_t;
using LocalID = std::uint32_t;
using Weight = std::int64_t;
using BlockID = std::uint32_t;
using PEID = int;

inline constexpr LocalID kInvalidLocalID = std::numeric_limits<LocalID>::max();
inline constexpr GlobalID kInvalidGlobalID = std::numeric_limits<GlobalID>::max();
inline constexpr BlockID kInvalidBlockID = std::numeric_limits<BlockID>::max();

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Raised by the METIS reader; the message names the offending line.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string &what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        _line(line) {}

  [[nodiscard]] std::size_t line() const { return _line; }

private:
  std::size_t _line;
};

inline void expects(const bool condition, const char *what) {
  if (!condition) {
    throw ContractViolation(what);
  }
}

} // namespace dkmp
