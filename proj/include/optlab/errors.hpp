#pragma once

#include <stdexcept>
#include <string>

namespace optlab {

// a non-finite gradient reached an optimizer step; callers treat this as a
// divergence signal, not a crash
struct RejectedStepError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// orthogonalization asked for on an identically-zero matrix
struct DegenerateInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// constant-momentum stability bound requested outside beta1^2 < beta2
struct StabilityConditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// loss-vs-compute polyline is not monotone, so inversion is ill-posed
struct AmbiguousInversionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// a fit asked for with too few distinct model sizes to pin its parameters
struct RankDeficientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// bad experiment config; `path` names the offending field, e.g. "optimizer.alpha.kappa"
struct ValidationError : std::runtime_error {
  ValidationError(std::string field_path, const std::string& what)
      : std::runtime_error(field_path + ": " + what), path(std::move(field_path)) {}
  std::string path;
};

// filesystem trouble while reading inputs or writing run outputs
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace optlab
