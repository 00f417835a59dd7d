#pragma once

#include <cstdint>
#include <vector>

#include <optlab/rng.hpp>
#include <optlab/schedules.hpp>

namespace optlab {

// law of the nonzero gradient magnitude on arrival steps
enum class GradientLaw { Unit, Normal };

// Moment-ratio process driven by Bernoulli gradient arrivals: between
// arrivals the first and second moments decay at their scheduled rates and
// the per-step ratio Y = m / (sqrt(v) + eps) is summed over each
// inter-arrival window.
struct ZProcessConfig {
  ScheduleSpec beta1 = log_time_beta();
  ScheduleSpec beta2 = log_time_beta();
  double p = 0.1;           // arrival probability per step
  int windows = 2;          // inter-arrival windows to record per trial
  long long trials = 1000;
  double eps = 1e-8;
  GradientLaw law = GradientLaw::Unit;
  double censor = 1e12;     // |Z| beyond this is recorded at the cap and flagged
  long long max_steps = 0;  // per-trial step cap; 0 picks one from p and windows
  std::uint64_t seed = 1;
};

struct ZWindowStats {
  int window = 0;            // 1-based inter-arrival window index
  double mean_abs = 0.0;     // E|Z|, censored trials counted at the cap
  double se = 0.0;           // standard error of mean_abs
  double max_abs = 0.0;
  double censored_frac = 0.0;
  double mean_gap = 0.0;     // empirical mean window length in steps
};

struct ZProcessResult {
  std::vector<ZWindowStats> windows;
  long long trials = 0;
};

ZProcessResult simulate_z(const ZProcessConfig& cfg);

// closed-form sup bound on |Z| under constant rates; requires beta1^2 < beta2
// and throws StabilityConditionError otherwise
double bound_constant_rates(double beta1, double beta2);

enum class StabilityVerdict { Bounded, SqrtP, Divergent };

struct ZGridPoint {
  double p = 0.0;
  double mean_abs = 0.0;
  double censored_frac = 0.0;
};

struct StabilityReport {
  StabilityVerdict verdict = StabilityVerdict::Divergent;
  double slope = 0.0;      // d log10 E|Z| per decade of 1/p
  double curvature = 0.0;  // quadratic trend coefficient, decades^-2
};

// Classify how E|Z| scales as arrivals thin out. Requires the p grid to span
// at least three decades and at least 1e3 trials behind each point. A steady
// half slope reads as the sqrt(1/p) law. A flat trend is bounded only while
// it stays flat: a saturating family flattens further with each decade, while
// a family losing its moment bound accelerates (convex curvature) as the
// blowup regime approaches, and that acceleration, any censoring, or growth
// outside the recognized bands reads as divergent.
StabilityReport classify_stability(const std::vector<ZGridPoint>& grid, long long trials);

}  // namespace optlab
