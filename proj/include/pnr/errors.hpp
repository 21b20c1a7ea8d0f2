#pragma once

#include <stdexcept>
#include <string>

namespace pnr {

// Thrown when matrix/vector shapes or index ranges do not line up.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when an outcome grid does not cover the requested support.
struct CoverageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a photon count exceeds the simulator's configured peak table.
struct TruncationOverflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File-system / serialization failure (CLI exit code 3).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pnr
