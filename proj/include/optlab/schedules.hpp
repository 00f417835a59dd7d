#pragma once

namespace optlab {

// Every time-varying hyperparameter (momentum, damping, weight decay, learning
// rate shape) is one of these closed-form schedules evaluated at step t.
enum class ScheduleKind {
  Constant,            // value, for all t
  LogTimeBeta,         // 1 - delta/(delta + t)
  DampingDecaying,     // alpha_tilde * (1+t)^(1-kappa)
  DampingConstant,     // alpha_tilde * T^(-kappa) * (1+t)
  UndampedNesterov,    // (delta + t)/delta
  WeightDecayDecaying, // omega / (T/big_omega + t)
  WeightDecayConstant, // omega / T
  WarmupCosine,        // linear 0.01 -> 1 over ceil(warmup_frac*T), cosine down to final_frac at T
  AdemamixBeta1Warmup, // slow-momentum ramp from beta3 to beta_target over T
  AdemamixAlphaWarmup, // min(t/T, 1) * alpha_tilde
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Constant;
  double value = 0.0;        // Constant
  double delta = 8.0;        // log-time momentum / undamped Nesterov
  double kappa = 0.85;       // damping exponent
  double alpha_tilde = 1.0;  // damping scale, or warmup target
  double omega = 4.0;        // weight decay scale
  double big_omega = 10.0;   // decaying-wd horizon divisor
  double horizon = 0.0;      // T, where the schedule needs one
  double beta_target = 0.0;  // slow-momentum warmup endpoint
  double beta3 = 0.9;        // slow-momentum warmup start
  double warmup_frac = 0.02;
  double final_frac = 0.10;
};

// evaluate at (possibly fractional) step t >= 0; throws std::invalid_argument
// on bad parameters and std::out_of_range past a hard horizon
double eval_schedule(const ScheduleSpec& spec, double t);

ScheduleSpec constant_schedule(double v);
ScheduleSpec log_time_beta(double delta = 8.0);
ScheduleSpec damping_decaying(double kappa = 0.85, double alpha_tilde = 1.0);
ScheduleSpec damping_constant(double kappa, double horizon, double alpha_tilde = 1.0);
ScheduleSpec undamped_nesterov(double delta = 8.0);
ScheduleSpec weight_decay_decaying(double omega, double horizon, double big_omega = 10.0);
ScheduleSpec weight_decay_constant(double omega, double horizon);
ScheduleSpec warmup_cosine(double horizon, double warmup_frac = 0.02, double final_frac = 0.10);
ScheduleSpec ademamix_beta1_warmup(double beta_target, double horizon, double beta3 = 0.9);
ScheduleSpec ademamix_alpha_warmup(double alpha, double horizon);

}  // namespace optlab
