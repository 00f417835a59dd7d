#include <optlab/optimizers.hpp>

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>

#include <optlab/errors.hpp>
#include <optlab/newton_schulz.hpp>

namespace optlab {

namespace {

void check_gradient(const ParamBlock& p, const Eigen::ArrayXd& g, long long t) {
  if (g.size() != p.values.size()) {
    throw std::invalid_argument("optimizer: gradient size " + std::to_string(g.size()) +
                                " does not match parameter size " +
                                std::to_string(p.values.size()));
  }
  if (!g.allFinite()) {
    throw RejectedStepError("optimizer: non-finite gradient at step " + std::to_string(t));
  }
}

void ensure_buffer(Eigen::ArrayXd& buf, Eigen::Index n) {
  if (buf.size() == 0) {
    buf = Eigen::ArrayXd::Zero(n);
  } else if (buf.size() != n) {
    throw std::invalid_argument("optimizer: state buffer does not match parameter size");
  }
}

// x^e through exp/log, which vectorizes; callers guarantee x > 0
Eigen::ArrayXd pow_positive(const Eigen::ArrayXd& x, double e) {
  if (e == 1.0) return x;
  return (x.log() * e).exp();
}

// t^e with the t=0, e<0 corner pinned to a huge-but-usable value so that a
// later min() against the clip threshold stays meaningful
double time_power(double t, double e) {
  const double v = std::pow(t, e);
  return std::isfinite(v) ? v : 1e300;
}

// damping evaluated at per-coordinate effective times
Eigen::ArrayXd eval_damping_at(const ScheduleSpec& s, const Eigen::ArrayXd& t_eff) {
  switch (s.kind) {
    case ScheduleKind::DampingDecaying:
      return s.alpha_tilde * pow_positive(1.0 + t_eff, 1.0 - s.kappa);
    case ScheduleKind::DampingConstant:
      if (s.horizon <= 0.0) throw std::invalid_argument("damping: horizon must be > 0");
      return s.alpha_tilde * std::pow(s.horizon, -s.kappa) * (1.0 + t_eff);
    case ScheduleKind::Constant:
      return Eigen::ArrayXd::Constant(t_eff.size(), s.value);
    default:
      throw std::invalid_argument("damping: schedule kind not usable at per-coordinate times");
  }
}

enum class Numerator { Moment, GradPlusDamped };

// shared core of the adaptive family: two moment buffers, normalized update,
// decoupled weight decay; the variants differ only in the numerator
void adaptive_step(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
                   const OptimizerConfig& cfg, Numerator num) {
  check_gradient(p, g, t);
  ensure_buffer(st.m, p.values.size());
  ensure_buffer(st.s, p.values.size());

  const double td = static_cast<double>(t);
  const double b1 = eval_schedule(cfg.beta1, td);
  const double b2 = eval_schedule(cfg.beta2, td);
  st.m = b1 * st.m + (1.0 - b1) * g;
  st.s = b2 * st.s + (1.0 - b2) * g.square();
  st.beta1_prod *= b1;
  st.beta2_prod *= b2;
  const double mc = cfg.bias_correct_first ? 1.0 - st.beta1_prod : 1.0;
  const double sc = cfg.bias_correct_second ? 1.0 - st.beta2_prod : 1.0;

  const double lr_t = eval_schedule(cfg.lr, td);
  const double wd = eval_schedule(cfg.weight_decay, td);
  if (num == Numerator::Moment) {
    p.values -=
        lr_t * (cfg.peak_lr * (st.m / mc) / ((st.s / sc).sqrt() + cfg.eps) + wd * p.values);
  } else {
    const double a = eval_schedule(cfg.damping, td);
    p.values -= lr_t * (cfg.peak_lr * (g + (a / mc) * st.m) / ((st.s / sc).sqrt() + cfg.eps) +
                        wd * p.values);
  }
  ++st.step;
}

// shared tail of the effective-time variants: fraction-of-active-time
// averaging and the clipped snr transform
struct TimeScaled {
  Eigen::ArrayXd t_eff;
  Eigen::ArrayXd tau_tilde;
};

TimeScaled update_tau(OptimizerState& st, const Eigen::ArrayXd& g, double td, double delta,
                      double eps) {
  const double w = delta / (td + delta);
  st.tau = (1.0 - w) * st.tau + w * (g.abs() / (g.abs() + st.s.sqrt() + eps));
  TimeScaled out;
  out.t_eff = (td * st.tau).max(1.0);
  const Eigen::ArrayXd clipped = st.tau.min(0.5);
  out.tau_tilde = (clipped / (1.0 - clipped)).max(1.0 / (1.0 + td));
  return out;
}

}  // namespace

ParamBlock ParamBlock::vector(int n) {
  ParamBlock b;
  b.values = Eigen::ArrayXd::Zero(n);
  b.rows = n;
  b.cols = 1;
  b.is_matrix = false;
  return b;
}

ParamBlock ParamBlock::matrix(int r, int c) {
  ParamBlock b;
  b.values = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(r) * c);
  b.rows = r;
  b.cols = c;
  b.is_matrix = true;
  return b;
}

void step_adamw(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
                const OptimizerConfig& cfg) {
  adaptive_step(p, st, g, t, cfg, Numerator::Moment);
}

void step_log_adamw(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
                    const OptimizerConfig& cfg) {
  adaptive_step(p, st, g, t, cfg, Numerator::Moment);
}

void step_log_nadamw(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
                     const OptimizerConfig& cfg) {
  adaptive_step(p, st, g, t, cfg, Numerator::GradPlusDamped);
}

void step_adana(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
                const OptimizerConfig& cfg) {
  adaptive_step(p, st, g, t, cfg, Numerator::GradPlusDamped);
}

void step_ademamix(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
                   const OptimizerConfig& cfg) {
  check_gradient(p, g, t);
  ensure_buffer(st.m, p.values.size());
  ensure_buffer(st.s, p.values.size());
  ensure_buffer(st.m_fast, p.values.size());

  const double td = static_cast<double>(t);
  const double b1 = eval_schedule(cfg.beta1, td);
  const double b2 = eval_schedule(cfg.beta2, td);
  const double b3 = cfg.beta3;
  st.m_fast = b3 * st.m_fast + (1.0 - b3) * g;
  st.m = b1 * st.m + (1.0 - b1) * g;
  st.s = b2 * st.s + (1.0 - b2) * g.square();
  st.beta2_prod *= b2;
  st.beta3_prod *= b3;
  // only the fast moment and the curvature proxy are debiased; the slow
  // moment is deliberately left raw
  const double fc = 1.0 - st.beta3_prod;
  const double sc = 1.0 - st.beta2_prod;

  const double mix = eval_schedule(cfg.alpha_warmup, td);
  const double lr_t = eval_schedule(cfg.lr, td);
  const double wd = eval_schedule(cfg.weight_decay, td);
  p.values -= lr_t * (cfg.peak_lr * (st.m_fast / fc + mix * st.m) /
                          ((st.s / sc).sqrt() + cfg.eps) +
                      wd * p.values);
  ++st.step;
}

void step_dana(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
               const OptimizerConfig& cfg) {
  check_gradient(p, g, t);
  ensure_buffer(st.m, p.values.size());

  const double td = static_cast<double>(t);
  const double b1 = eval_schedule(cfg.beta1, td);
  st.m = b1 * st.m + (1.0 - b1) * g;
  st.beta1_prod *= b1;

  const double a = eval_schedule(cfg.damping, td);
  const double lr_t = eval_schedule(cfg.lr, td);
  const double wd = eval_schedule(cfg.weight_decay, td);
  p.values -= lr_t * (cfg.peak_lr * (g + a * st.m) + wd * p.values);
  ++st.step;
}

void step_dana_star(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
                    const OptimizerConfig& cfg) {
  check_gradient(p, g, t);
  ensure_buffer(st.m, p.values.size());
  ensure_buffer(st.s, p.values.size());
  ensure_buffer(st.tau, p.values.size());

  const double td = static_cast<double>(t);
  const double b1 = eval_schedule(cfg.beta1, td);
  const double b2 = eval_schedule(cfg.beta2, td);
  st.m = b1 * st.m + (1.0 - b1) * g;
  st.s = b2 * st.s + (1.0 - b2) * g.square();

  const TimeScaled ts = update_tau(st, g, td, cfg.beta1.delta, cfg.eps);
  const Eigen::ArrayXd alpha = eval_damping_at(cfg.damping, ts.t_eff);
  const Eigen::ArrayXd root = ts.tau_tilde.sqrt();

  const double lr_t = eval_schedule(cfg.lr, td);
  const double wd = eval_schedule(cfg.weight_decay, td);
  p.values -=
      lr_t * (cfg.peak_lr * root * (g + alpha * st.m) / (st.s.sqrt() + cfg.eps) + wd * p.values);
  ++st.step;
}

void step_dana_mk4(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
                   const OptimizerConfig& cfg) {
  check_gradient(p, g, t);
  ensure_buffer(st.m, p.values.size());
  ensure_buffer(st.s, p.values.size());

  const double td = static_cast<double>(t);
  const double b1 = eval_schedule(cfg.beta1, td);
  const double b2 = eval_schedule(cfg.beta2, td);
  st.m = b1 * st.m + (1.0 - b1) * g;
  st.s = b2 * st.s + (1.0 - b2) * g.square();

  const double tpow = time_power(td, 1.0 - cfg.damping.kappa);
  const Eigen::ArrayXd denom = st.s.sqrt() + cfg.eps;
  const Eigen::ArrayXd ratio = st.m.abs() / denom;

  const double lr_t = eval_schedule(cfg.lr, td);
  const double wd = eval_schedule(cfg.weight_decay, td);
  p.values -= lr_t * (cfg.peak_lr * (g / denom + st.m.sign() * ((tpow * ratio).min(cfg.clip_snr) +
                                                                ratio)) +
                      wd * p.values);
  ++st.step;
}

void step_dana_star_mk4(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
                        const OptimizerConfig& cfg) {
  check_gradient(p, g, t);
  ensure_buffer(st.m, p.values.size());
  ensure_buffer(st.s, p.values.size());
  ensure_buffer(st.tau, p.values.size());

  const double td = static_cast<double>(t);
  const double b1 = eval_schedule(cfg.beta1, td);
  const double b2 = eval_schedule(cfg.beta2, td);
  st.m = b1 * st.m + (1.0 - b1) * g;
  st.s = b2 * st.s + (1.0 - b2) * g.square();

  const TimeScaled ts = update_tau(st, g, td, cfg.beta1.delta, cfg.eps);
  const Eigen::ArrayXd norm = ts.tau_tilde.sqrt() / (st.s.sqrt() + cfg.eps);
  const Eigen::ArrayXd scaled_m = st.m.abs() * norm;
  const Eigen::ArrayXd snr =
      (pow_positive(ts.t_eff, 1.0 - cfg.damping.kappa) * scaled_m / ts.tau_tilde)
          .min(cfg.clip_snr);

  const double lr_t = eval_schedule(cfg.lr, td);
  const double wd = eval_schedule(cfg.weight_decay, td);
  p.values -= lr_t * (cfg.peak_lr * (g * norm + st.m.sign() * (ts.tau_tilde * snr + scaled_m)) +
                      wd * p.values);
  ++st.step;
}

Eigen::ArrayXd step_nesterov(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g,
                             long long t, const OptimizerConfig& cfg) {
  check_gradient(p, g, t);
  const double td = static_cast<double>(t);
  const double lr = cfg.peak_lr * eval_schedule(cfg.lr, td);
  const auto mu = [&cfg](long long k) -> double {
    if (k < 0) return 0.0;
    if (cfg.nesterov_alt_momentum) return 1.0 - 2.0 / (static_cast<double>(k) + 1.0);
    return static_cast<double>(k) / (static_cast<double>(k) + 3.0);
  };

  switch (cfg.nesterov_form) {
    case NesterovForm::TwoSequence: {
      // p holds the iterate, aux holds the lookahead; g was taken at aux
      if (st.aux.size() == 0) st.aux = p.values;
      Eigen::ArrayXd next = st.aux - lr * g;
      st.aux = next + mu(t) * (next - p.values);
      p.values = std::move(next);
      ++st.step;
      return st.aux;
    }
    case NesterovForm::ExtraGradient: {
      // folded single-sequence form; exactly reproduces the pair's lookahead
      ensure_buffer(st.m, p.values.size());
      st.m = mu(t - 1) * st.m + g;
      p.values -= lr * (g + mu(t) * st.m);
      ++st.step;
      return p.values;
    }
    case NesterovForm::MomentumEma: {
      // averaged buffer with a growing mixing coefficient; approximate
      ensure_buffer(st.m, p.values.size());
      const double b = eval_schedule(cfg.beta1, td);
      st.m = b * st.m + (1.0 - b) * g;
      const double mix = (cfg.beta1.delta + td) / cfg.beta1.delta;
      p.values -= lr * (g + mix * st.m);
      ++st.step;
      return p.values;
    }
  }
  throw std::invalid_argument("nesterov: unknown formulation");
}

void step_muon(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& g, long long t,
               const OptimizerConfig& cfg) {
  if (!p.is_matrix) {
    if (cfg.muon_fallback) {
      step_adamw(p, st, g, t, *cfg.muon_fallback);
    } else {
      OptimizerConfig fb = adamw_config(cfg.peak_lr);
      fb.lr = cfg.lr;
      fb.weight_decay = cfg.weight_decay;
      fb.eps = cfg.eps;
      step_adamw(p, st, g, t, fb);
    }
    return;
  }

  check_gradient(p, g, t);
  ensure_buffer(st.m, p.values.size());
  const double td = static_cast<double>(t);
  st.m = cfg.muon.momentum * st.m + g;
  const Eigen::ArrayXd mixed = cfg.muon.nesterov
                                   ? Eigen::ArrayXd(g + cfg.muon.momentum * st.m)
                                   : st.m;

  const double lr_t = eval_schedule(cfg.lr, td);
  const double wd = eval_schedule(cfg.weight_decay, td);
  if ((mixed == 0.0).all()) {
    p.values *= 1.0 - lr_t * wd;
    ++st.step;
    return;
  }

  const Eigen::Map<const Eigen::MatrixXd> mat(mixed.data(), p.rows, p.cols);
  const Eigen::MatrixXd ortho = newton_schulz(mat, cfg.muon.ns_iters, cfg.eps);
  // scale so that a generic update has per-entry magnitude near matched_rms
  const double adj = lr_t * cfg.peak_lr * cfg.muon.matched_rms *
                     std::sqrt(static_cast<double>(std::max(p.rows, p.cols)));
  const Eigen::Map<const Eigen::ArrayXd> flat(ortho.data(), ortho.size());
  p.values = (1.0 - lr_t * wd) * p.values - adj * flat;
  ++st.step;
}

const Eigen::ArrayXd& OptimizerDriver::query_point(const ParamBlock& p) const {
  if (cfg_.algorithm == Algorithm::Nesterov &&
      cfg_.nesterov_form == NesterovForm::TwoSequence && state_.aux.size() != 0) {
    return state_.aux;
  }
  return p.values;
}

void OptimizerDriver::apply(ParamBlock& p, Eigen::ArrayXd grad) {
  if (cfg_.grad_clip > 0.0 && grad.allFinite()) {
    const double norm = grad.matrix().stableNorm();
    if (norm > cfg_.grad_clip) grad *= cfg_.grad_clip / norm;
  }
  const long long t = state_.step;
  switch (cfg_.algorithm) {
    case Algorithm::AdamW: step_adamw(p, state_, grad, t, cfg_); break;
    case Algorithm::LogAdamW: step_log_adamw(p, state_, grad, t, cfg_); break;
    case Algorithm::LogNAdamW: step_log_nadamw(p, state_, grad, t, cfg_); break;
    case Algorithm::Adana: step_adana(p, state_, grad, t, cfg_); break;
    case Algorithm::Ademamix: step_ademamix(p, state_, grad, t, cfg_); break;
    case Algorithm::Dana: step_dana(p, state_, grad, t, cfg_); break;
    case Algorithm::DanaStar: step_dana_star(p, state_, grad, t, cfg_); break;
    case Algorithm::DanaMk4: step_dana_mk4(p, state_, grad, t, cfg_); break;
    case Algorithm::DanaStarMk4: step_dana_star_mk4(p, state_, grad, t, cfg_); break;
    case Algorithm::Nesterov: step_nesterov(p, state_, grad, t, cfg_); break;
    case Algorithm::Muon: step_muon(p, state_, grad, t, cfg_); break;
  }
}

OptimizerConfig adamw_config(double peak_lr, double beta1, double beta2) {
  OptimizerConfig c;
  c.algorithm = Algorithm::AdamW;
  c.peak_lr = peak_lr;
  c.beta1 = constant_schedule(beta1);
  c.beta2 = constant_schedule(beta2);
  c.damping = constant_schedule(0.0);
  return c;
}

OptimizerConfig log_adamw_config(double peak_lr, double delta) {
  OptimizerConfig c;
  c.algorithm = Algorithm::LogAdamW;
  c.peak_lr = peak_lr;
  c.beta1 = log_time_beta(delta);
  c.beta2 = log_time_beta(delta);
  c.damping = constant_schedule(0.0);
  return c;
}

OptimizerConfig log_nadamw_config(double peak_lr, double delta) {
  OptimizerConfig c;
  c.algorithm = Algorithm::LogNAdamW;
  c.peak_lr = peak_lr;
  c.beta1 = log_time_beta(delta);
  c.beta2 = log_time_beta(delta);
  c.damping = undamped_nesterov(delta);
  return c;
}

OptimizerConfig adana_config(double peak_lr, double kappa, double delta) {
  OptimizerConfig c;
  c.algorithm = Algorithm::Adana;
  c.peak_lr = peak_lr;
  c.beta1 = log_time_beta(delta);
  c.beta2 = log_time_beta(delta);
  c.damping = damping_decaying(kappa);
  return c;
}

OptimizerConfig ademamix_config(double peak_lr, double horizon, double beta1, double beta2,
                                double beta3, double alpha, double alpha_horizon) {
  OptimizerConfig c;
  c.algorithm = Algorithm::Ademamix;
  c.peak_lr = peak_lr;
  c.beta1 = ademamix_beta1_warmup(beta1, horizon, beta3);
  c.beta2 = constant_schedule(beta2);
  c.beta3 = beta3;
  c.alpha_warmup = ademamix_alpha_warmup(alpha, alpha_horizon);
  c.damping = constant_schedule(0.0);
  return c;
}

OptimizerConfig dana_config(double peak_lr, double kappa, double delta) {
  OptimizerConfig c;
  c.algorithm = Algorithm::Dana;
  c.peak_lr = peak_lr;
  c.beta1 = log_time_beta(delta);
  c.beta2 = log_time_beta(delta);
  c.damping = damping_decaying(kappa);
  return c;
}

OptimizerConfig dana_star_config(double peak_lr, double kappa, double delta) {
  OptimizerConfig c = adana_config(peak_lr, kappa, delta);
  c.algorithm = Algorithm::DanaStar;
  return c;
}

OptimizerConfig dana_mk4_config(double peak_lr, double kappa, double delta, double clip_snr) {
  OptimizerConfig c = adana_config(peak_lr, kappa, delta);
  c.algorithm = Algorithm::DanaMk4;
  c.clip_snr = clip_snr;
  return c;
}

OptimizerConfig dana_star_mk4_config(double peak_lr, double kappa, double delta,
                                     double clip_snr) {
  OptimizerConfig c = adana_config(peak_lr, kappa, delta);
  c.algorithm = Algorithm::DanaStarMk4;
  c.clip_snr = clip_snr;
  return c;
}

OptimizerConfig nesterov_config(double lr, NesterovForm form) {
  OptimizerConfig c;
  c.algorithm = Algorithm::Nesterov;
  c.peak_lr = lr;
  c.nesterov_form = form;
  c.beta1 = log_time_beta(3.0);  // averaged form's rate, matching mu_t = t/(t+3)
  c.damping = constant_schedule(0.0);
  return c;
}

OptimizerConfig muon_config(double peak_lr, double momentum, bool nesterov) {
  OptimizerConfig c;
  c.algorithm = Algorithm::Muon;
  c.peak_lr = peak_lr;
  c.muon.momentum = momentum;
  c.muon.nesterov = nesterov;
  c.damping = constant_schedule(0.0);
  return c;
}

}  // namespace optlab
