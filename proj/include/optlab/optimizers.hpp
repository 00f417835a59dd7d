#pragma once

#include <Eigen/Core>
#include <memory>

#include <optlab/schedules.hpp>

namespace optlab {

// one tensor of trainable parameters, stored flat; matrix blocks remember
// their shape so the orthogonalizing update can act on them as matrices
struct ParamBlock {
  Eigen::ArrayXd values;
  int rows = 0;
  int cols = 0;
  bool is_matrix = false;

  static ParamBlock vector(int n);
  static ParamBlock matrix(int r, int c);
};

// Buffers shared across the optimizer family. The second moment is named s
// here; v elsewhere in this codebase means a feature count.
struct OptimizerState {
  Eigen::ArrayXd m;       // first moment
  Eigen::ArrayXd s;       // second moment
  Eigen::ArrayXd m_fast;  // short-window moment (two-speed variants)
  Eigen::ArrayXd tau;     // per-coordinate effective-time fraction
  Eigen::ArrayXd aux;     // lookahead point (pair-form Nesterov)
  long long step = 0;
  double beta1_prod = 1.0;
  double beta2_prod = 1.0;
  double beta3_prod = 1.0;
};

enum class Algorithm {
  AdamW,
  LogAdamW,
  LogNAdamW,
  Adana,
  Ademamix,
  Dana,
  DanaStar,
  DanaMk4,
  DanaStarMk4,
  Nesterov,
  Muon,
};

enum class NesterovForm {
  TwoSequence,   // explicit iterate + lookahead pair
  ExtraGradient, // single sequence with an accumulated momentum buffer
  MomentumEma,   // single sequence with an averaged buffer; approximate
};

struct MuonOptions {
  int ns_iters = 5;
  double matched_rms = 0.2;  // target per-entry update scale
  bool nesterov = true;      // mix the fresh gradient back into the buffer
  double momentum = 0.95;
};

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::AdamW;
  double peak_lr = 1.0;                      // global scale on the update
  ScheduleSpec lr = constant_schedule(1.0);  // multiplicative shape on top
  ScheduleSpec beta1 = log_time_beta();
  ScheduleSpec beta2 = log_time_beta();
  ScheduleSpec weight_decay = constant_schedule(0.0);
  ScheduleSpec damping = damping_decaying();           // momentum mixing alpha(t)
  ScheduleSpec alpha_warmup = constant_schedule(0.0);  // two-speed mixing ramp
  double eps = 1e-8;
  double clip_snr = 2.0;  // momentum-share cap in the mk4 variants
  double grad_clip = 0.0; // global-norm cap applied by the driver; 0 = off
  double beta3 = 0.9;     // short-window rate (two-speed variants)
  bool bias_correct_first = false;
  bool bias_correct_second = false;
  NesterovForm nesterov_form = NesterovForm::TwoSequence;
  bool nesterov_alt_momentum = false;  // mu_t = 1 - 2/(t+1) instead of t/(t+3)
  MuonOptions muon;
  // non-matrix blocks under the orthogonalizing update use this; when null, a
  // plain adaptive config with the same rates is derived on the fly
  std::shared_ptr<OptimizerConfig> muon_fallback;
};

// Single-tensor update rules. Each call consumes the gradient for step t,
// mutates the parameters and state in place, and advances state.step by one.
// A non-finite gradient throws RejectedStepError; callers treat that as a
// divergence signal. Shape mismatches throw std::invalid_argument.
void step_adamw(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad, long long t,
                const OptimizerConfig& cfg);
void step_log_adamw(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad, long long t,
                    const OptimizerConfig& cfg);
void step_log_nadamw(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad, long long t,
                     const OptimizerConfig& cfg);
void step_adana(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad, long long t,
                const OptimizerConfig& cfg);
void step_ademamix(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad, long long t,
                   const OptimizerConfig& cfg);
void step_dana(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad, long long t,
               const OptimizerConfig& cfg);
void step_dana_star(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad, long long t,
                    const OptimizerConfig& cfg);
void step_dana_mk4(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad, long long t,
                   const OptimizerConfig& cfg);
void step_dana_star_mk4(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad,
                        long long t, const OptimizerConfig& cfg);
// returns the next gradient query point (the lookahead point in pair form)
Eigen::ArrayXd step_nesterov(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad,
                             long long t, const OptimizerConfig& cfg);
void step_muon(ParamBlock& p, OptimizerState& st, const Eigen::ArrayXd& grad, long long t,
               const OptimizerConfig& cfg);

// Owns the state and dispatches on the configured algorithm. query_point says
// where the next gradient must be evaluated (distinct from the parameters only
// for pair-form Nesterov); apply optionally clips the gradient's global norm
// and runs one update at t = step count.
class OptimizerDriver {
public:
  explicit OptimizerDriver(OptimizerConfig cfg) : cfg_(std::move(cfg)) {}

  const Eigen::ArrayXd& query_point(const ParamBlock& p) const;
  void apply(ParamBlock& p, Eigen::ArrayXd grad);

  const OptimizerState& state() const { return state_; }
  OptimizerState& state() { return state_; }
  const OptimizerConfig& config() const { return cfg_; }

private:
  OptimizerConfig cfg_;
  OptimizerState state_;
};

// presets wired to the default hyperparameters of each rule
OptimizerConfig adamw_config(double peak_lr, double beta1 = 0.9, double beta2 = 0.999);
OptimizerConfig log_adamw_config(double peak_lr, double delta = 8.0);
OptimizerConfig log_nadamw_config(double peak_lr, double delta = 8.0);
OptimizerConfig adana_config(double peak_lr, double kappa = 0.85, double delta = 8.0);
OptimizerConfig ademamix_config(double peak_lr, double horizon, double beta1, double beta2,
                                double beta3, double alpha, double alpha_horizon);
OptimizerConfig dana_config(double peak_lr, double kappa = 0.85, double delta = 8.0);
OptimizerConfig dana_star_config(double peak_lr, double kappa = 0.85, double delta = 8.0);
OptimizerConfig dana_mk4_config(double peak_lr, double kappa = 0.85, double delta = 8.0,
                                double clip_snr = 2.0);
OptimizerConfig dana_star_mk4_config(double peak_lr, double kappa = 0.85, double delta = 8.0,
                                     double clip_snr = 2.0);
OptimizerConfig nesterov_config(double lr, NesterovForm form = NesterovForm::TwoSequence);
OptimizerConfig muon_config(double peak_lr, double momentum = 0.95, bool nesterov = true);

}  // namespace optlab
