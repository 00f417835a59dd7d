#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace optlab {

// transformer shape bookkeeping; all counts are exact integers
struct ArchSpec {
  long long n_layer = 0;
  long long n_embd = 0;
  long long n_head = 0;
  long long head_dim = 64;
  long long vocab = 50304;
  long long seq_len = 2048;
};

// width-indexed family: 64 channels per head, depth = floor(3h/4)
ArchSpec arch_from_heads(int heads);

// P = 12 * n_layer * n_embd^2
long long nonembedding_params(const ArchSpec& a);
// P plus one- or two-sided embedding tables
long long total_params(const ArchSpec& a, bool two_sided_embeddings = true);

enum class FlopsConvention {
  SixP,      // 6 P per token, non-embedding only
  SixN,      // 6 (P + E V) per token, one-sided embedding compute included
  Marginal,  // 6 P + 12 * n_layer * n_embd * seq_len, attention term included
};
long long flops_per_token(const ArchSpec& a, FlopsConvention conv);

// FLOPs in one petaFLOP-hour
constexpr double kPetaflopHour = 3.6e18;

struct ChinchillaPlan {
  long long tokens = 0;
  long long iterations = 0;
};
// twenty tokens per parameter, floored to whole optimizer steps
ChinchillaPlan chinchilla_plan(long long params, long long tokens_per_batch);

// ---- saturating learning-rate law: lr(P) = a * (b + P)^d ----

struct LrPoint {
  double params = 0.0;
  double lr = 0.0;
  double weight = 1.0;  // residual weight (rank weighting happens upstream)
  int size_id = 0;      // grouping key for bootstrap resampling
};

struct LrFitOptions {
  long long max_iters = 200000;
  double step = 0.5;   // adagrad step size
  double tol = 1e-12;  // stop once the loss stops improving by this much
};

struct LrFit {
  double a = 0.0;
  double b = 0.0;
  double d = 0.0;
  double loss = 0.0;  // weighted mean squared log residual
  long long iters = 0;
  bool converged = false;
};

// weighted log-space fit; a and b stay positive through an exp reparam;
// throws RankDeficientError when all points share one model size
LrFit fit_saturated_lr(const std::vector<LrPoint>& pts, const LrFitOptions& opts = {});
double eval_saturated_lr(const LrFit& fit, double params);

struct LrBand {
  double lo = 0.0;
  double hi = 0.0;
  double point = 0.0;
};

struct BootstrapOptions {
  int replicates = 100;
  std::uint64_t seed = 1;
};

struct BootstrapResult {
  std::vector<LrBand> bands;  // one per query size
  int skipped = 0;            // replicates abandoned after repeated degenerate draws
};

// resample whole model sizes with replacement and refit; replicates with
// fewer than two distinct sizes are redrawn up to ten times, then skipped
BootstrapResult bootstrap_lr_fit(const std::vector<LrPoint>& pts,
                                 const std::vector<double>& queries,
                                 const LrFitOptions& fit_opts = {},
                                 const BootstrapOptions& boot_opts = {});

// ---- loss-versus-compute power laws: L(C) = a + b C^-c + e C^-f ----

struct LossPoint {
  std::string curve;   // which setting the point belongs to
  double compute = 0.0;
  double loss = 0.0;
};

struct LossFitOptions {
  bool shared_offset = true;           // one irreducible-loss term across curves
  std::optional<double> fixed_offset;  // pin a instead of fitting it
  bool freeze_c = false;               // hold the first exponent at its init
  bool freeze_f = false;
  bool single_term = false;            // drop the b C^-c term entirely
  double init_a = 0.1;
  double init_b = 0.40;
  double init_c = 0.20;
  double init_e = 2.50;
  double init_f = 0.03;
  long long max_iters = 200000;
  double step = 0.1;
  double tol = 1e-14;
};

struct LossCurveFit {
  std::string curve;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double e = 0.0;
  double f = 0.0;
};

struct LossFit {
  double a = 0.0;  // shared offset (first curve's when not shared)
  std::vector<LossCurveFit> curves;
  double r2 = 0.0;
  double loss = 0.0;
  long long iters = 0;
};

LossFit fit_loss_power_law(const std::vector<LossPoint>& pts, const LossFitOptions& opts = {});
double eval_loss_power_law(const LossFit& fit, const std::string& curve, double compute);

// ---- compute-multiplier readout between two loss curves ----

struct MultiplierPoint {
  double compute = 0.0;          // target point's compute
  double loss = 0.0;
  double matched_compute = 0.0;  // baseline compute reaching the same loss
  double multiplier = 0.0;       // matched / target
  double efficiency = 0.0;       // multiplier - 1, by construction
};

// piecewise-linear inversion of the baseline polyline, linear in log10 C by
// default; edge segments extrapolate; a non-monotone baseline throws
// AmbiguousInversionError naming the offending points
std::vector<MultiplierPoint> compute_multiplier(
    const std::vector<std::pair<double, double>>& baseline,
    const std::vector<std::pair<double, double>>& target, bool log_axis = true);

// ---- learning-rate sensitivity: quadratic in log lr around the optimum ----

struct CurvaturePoint {
  double lr = 0.0;
  double loss = 0.0;
};

struct CurvatureFit {
  double center_lr = 0.0;
  double center_loss = 0.0;
  double zeta = 0.0;      // loss curvature per unit squared log-lr
  bool boundary = false;  // center fell outside the probed range
};

CurvatureFit fit_lr_curvature(const std::vector<CurvaturePoint>& pts);
// expected excess loss from missing the best lr by the given ratio
double curvature_penalty(const CurvatureFit& fit, double lr_ratio);

// ---- eigenvalue spectrum decay ----

// least-squares slope of log lambda_j on log j over the 1-based index range
// [first, last] (last = 0 means the whole vector); returns the decay exponent
// q in lambda_j ~ j^-q; non-positive eigenvalues in range are invalid
double fit_spectrum_exponent(const std::vector<double>& eigenvalues, int first = 1,
                             int last = 0);

}  // namespace optlab
