#pragma once

#include <stdexcept>
#include <string>

namespace ape {

// Every filter-level failure derives from std::runtime_error so callers can
// catch broadly; the concrete type tells the benchmark harness what happened.

// All importance weights vanished: the cloud no longer explains the data.
class DegenerateWeights : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (unnormalized weights, bad sizes).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid user-facing configuration (CLI flags, scenario files, filter knobs).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Target coincides with the sensor, so bearing is undefined.
class SingularGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cholesky or similar factorization failed even after jitter.
class NumericalBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ape
