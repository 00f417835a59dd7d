#include <optlab/schedules.hpp>

#include <cmath>
#include <stdexcept>

namespace optlab {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double eval_warmup_cosine(const ScheduleSpec& s, double t) {
  require(s.horizon > 0.0, "warmup-cosine: horizon must be > 0");
  require(s.warmup_frac > 0.0 && s.warmup_frac < 1.0, "warmup-cosine: warmup_frac must lie in (0,1)");
  require(s.final_frac > 0.0 && s.final_frac <= 1.0, "warmup-cosine: final_frac must lie in (0,1]");
  if (t > s.horizon) throw std::out_of_range("warmup-cosine: t past the horizon");
  const double ramp = std::ceil(s.warmup_frac * s.horizon);
  if (t <= ramp) return 0.01 + (1.0 - 0.01) * (t / ramp);
  const double phase = (t - ramp) / (s.horizon - ramp);
  return s.final_frac + (1.0 - s.final_frac) * 0.5 * (1.0 + std::cos(M_PI * phase));
}

double eval_beta1_warmup(const ScheduleSpec& s, double t) {
  require(s.horizon > 0.0, "beta1-warmup: horizon must be > 0");
  require(s.beta_target > 0.0 && s.beta_target < 1.0, "beta1-warmup: beta_target must lie in (0,1)");
  require(s.beta3 >= 0.0 && s.beta3 < 1.0, "beta1-warmup: beta3 must lie in [0,1)");
  const double lb1 = std::log(s.beta_target);
  if (s.beta3 == 0.0) {
    // limiting form of the interpolation below as beta3 -> 0
    if (t <= 0.0) return 0.0;
    return std::fmin(std::exp(lb1 * s.horizon / t), s.beta_target);
  }
  const double lb3 = std::log(s.beta3);
  const double frac = t / s.horizon;
  const double mix = (1.0 - frac) * lb1 + frac * lb3;
  return std::fmin(std::exp(lb3 * lb1 / mix), s.beta_target);
}

}  // namespace

double eval_schedule(const ScheduleSpec& s, double t) {
  require(std::isfinite(t) && t >= 0.0, "schedule: t must be finite and >= 0");
  switch (s.kind) {
    case ScheduleKind::Constant:
      return s.value;
    case ScheduleKind::LogTimeBeta:
      require(s.delta > 0.0, "log-time momentum: delta must be > 0");
      return t / (s.delta + t);
    case ScheduleKind::DampingDecaying:
      require(s.kappa >= 0.0, "damping: kappa must be >= 0");
      require(s.alpha_tilde >= 0.0, "damping: scale must be >= 0");
      return s.alpha_tilde * std::pow(1.0 + t, 1.0 - s.kappa);
    case ScheduleKind::DampingConstant:
      require(s.kappa >= 0.0, "damping: kappa must be >= 0");
      require(s.alpha_tilde >= 0.0, "damping: scale must be >= 0");
      require(s.horizon > 0.0, "damping: horizon must be > 0");
      return s.alpha_tilde * std::pow(s.horizon, -s.kappa) * (1.0 + t);
    case ScheduleKind::UndampedNesterov:
      require(s.delta > 0.0, "undamped Nesterov: delta must be > 0");
      return (s.delta + t) / s.delta;
    case ScheduleKind::WeightDecayDecaying:
      require(s.omega >= 0.0, "weight decay: omega must be >= 0");
      require(s.horizon > 0.0, "weight decay: horizon must be > 0");
      require(s.big_omega > 0.0, "weight decay: horizon divisor must be > 0");
      return s.omega / (s.horizon / s.big_omega + t);
    case ScheduleKind::WeightDecayConstant:
      require(s.omega >= 0.0, "weight decay: omega must be >= 0");
      require(s.horizon > 0.0, "weight decay: horizon must be > 0");
      return s.omega / s.horizon;
    case ScheduleKind::WarmupCosine:
      return eval_warmup_cosine(s, t);
    case ScheduleKind::AdemamixBeta1Warmup:
      return eval_beta1_warmup(s, t);
    case ScheduleKind::AdemamixAlphaWarmup:
      require(s.horizon > 0.0, "mixing warmup: horizon must be > 0");
      require(s.alpha_tilde >= 0.0, "mixing warmup: target must be >= 0");
      return std::fmin(t / s.horizon, 1.0) * s.alpha_tilde;
  }
  throw std::invalid_argument("schedule: unknown kind");
}

ScheduleSpec constant_schedule(double v) {
  ScheduleSpec s;
  s.kind = ScheduleKind::Constant;
  s.value = v;
  return s;
}

ScheduleSpec log_time_beta(double delta) {
  ScheduleSpec s;
  s.kind = ScheduleKind::LogTimeBeta;
  s.delta = delta;
  return s;
}

ScheduleSpec damping_decaying(double kappa, double alpha_tilde) {
  ScheduleSpec s;
  s.kind = ScheduleKind::DampingDecaying;
  s.kappa = kappa;
  s.alpha_tilde = alpha_tilde;
  return s;
}

ScheduleSpec damping_constant(double kappa, double horizon, double alpha_tilde) {
  ScheduleSpec s;
  s.kind = ScheduleKind::DampingConstant;
  s.kappa = kappa;
  s.horizon = horizon;
  s.alpha_tilde = alpha_tilde;
  return s;
}

ScheduleSpec undamped_nesterov(double delta) {
  ScheduleSpec s;
  s.kind = ScheduleKind::UndampedNesterov;
  s.delta = delta;
  return s;
}

ScheduleSpec weight_decay_decaying(double omega, double horizon, double big_omega) {
  ScheduleSpec s;
  s.kind = ScheduleKind::WeightDecayDecaying;
  s.omega = omega;
  s.horizon = horizon;
  s.big_omega = big_omega;
  return s;
}

ScheduleSpec weight_decay_constant(double omega, double horizon) {
  ScheduleSpec s;
  s.kind = ScheduleKind::WeightDecayConstant;
  s.omega = omega;
  s.horizon = horizon;
  return s;
}

ScheduleSpec warmup_cosine(double horizon, double warmup_frac, double final_frac) {
  ScheduleSpec s;
  s.kind = ScheduleKind::WarmupCosine;
  s.horizon = horizon;
  s.warmup_frac = warmup_frac;
  s.final_frac = final_frac;
  return s;
}

ScheduleSpec ademamix_beta1_warmup(double beta_target, double horizon, double beta3) {
  ScheduleSpec s;
  s.kind = ScheduleKind::AdemamixBeta1Warmup;
  s.beta_target = beta_target;
  s.horizon = horizon;
  s.beta3 = beta3;
  return s;
}

ScheduleSpec ademamix_alpha_warmup(double alpha, double horizon) {
  ScheduleSpec s;
  s.kind = ScheduleKind::AdemamixAlphaWarmup;
  s.alpha_tilde = alpha;
  s.horizon = horizon;
  return s;
}

}  // namespace optlab
