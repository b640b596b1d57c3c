#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace wgf {

/// Mismatched grids passed to an operation that requires a common grid.
class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A zero-sum measure cannot be balanced through zero-density regions:
/// the weighted H^-1 norm is +infinity.
class InfeasibleSupport : public std::runtime_error {
 public:
  explicit InfeasibleSupport(const std::string& what) : std::runtime_error(what) {}
};

/// Instance too large for the exact solver; use the entropic one.
class SizeLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver failed to reach its tolerance.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double residual, std::size_t iterations)
      : std::runtime_error(what), residual(residual), iterations(iterations) {}
  double residual = 0.0;
  std::size_t iterations = 0;
};

/// Requested tau exceeds g at the largest admissible epsilon.
class ScheduleOutOfRange : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Target density has mass where the transition kernel vanishes.
class InfeasibleTarget : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LinearSolveFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extended real used where a functional can be +infinity. The infinity is an
/// explicit flag, never a floating-point inf flowing through arithmetic.
struct ExtReal {
  double value = 0.0;
  bool is_infinite = false;

  static ExtReal finite(double v) { return {v, false}; }
  static ExtReal infinite() { return {0.0, true}; }

  bool finite_value(double* out) const {
    if (is_infinite) return false;
    *out = value;
    return true;
  }
};

/// Value of a curve action; infinite actions carry the offending slice indices.
struct ActionValue {
  double value = 0.0;
  bool is_infinite = false;
  std::vector<std::size_t> infeasible_slices;
};

}  // namespace wgf
