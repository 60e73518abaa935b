#pragma once

#include <stdexcept>
#include <string>

namespace lac {

/// Iterative solver hit its iteration cap without meeting its tolerance.
class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed-loop matrix has spectral radius >= 1.
class UnstableClosedLoop : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A rollout produced NaN or Inf.
class NonFinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A policy tried to read ground truth that has not been revealed yet.
class RevealViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Delayed feedback delivered for the wrong index.
class OutOfOrderFeedback : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace lac
