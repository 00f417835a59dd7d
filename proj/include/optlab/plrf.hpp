#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include <optlab/optimizers.hpp>
#include <optlab/rng.hpp>

namespace optlab {

// Power-law random-features least squares: v features whose j-th coordinate
// carries scale j^-rho, regressed on targets j^-eta through a fixed random
// embedding of trainable dimension d.
struct PlrfConfig {
  int dims = 100;     // trainable dimension d
  int features = 0;   // feature count v; 0 means 3 * dims
  double rho = 1.25;  // feature spectrum exponent
  double eta = 0.75;  // target decay exponent
  double label_noise = 0.0;
  std::uint64_t seed = 1;
};

struct Batch {
  Eigen::MatrixXd x;  // features x batch, rows already carry the j^-rho scale
  Eigen::VectorXd y;  // one target per column
};

class PlrfProblem {
public:
  static PlrfProblem build(const PlrfConfig& cfg);

  int dims() const { return static_cast<int>(embed_.cols()); }
  int features() const { return static_cast<int>(embed_.rows()); }
  const Eigen::MatrixXd& embed() const { return embed_; }
  const Eigen::VectorXd& targets() const { return targets_; }
  const Eigen::VectorXd& feature_scale() const { return scale_; }

  Batch sample_batch(int batch, Rng& rng) const;
  double batch_loss(const Eigen::VectorXd& theta, const Batch& batch) const;
  Eigen::VectorXd stochastic_grad(const Eigen::VectorXd& theta, const Batch& batch) const;
  double population_risk(const Eigen::VectorXd& theta) const;

private:
  Eigen::MatrixXd embed_;    // v x d, entries N(0, 1/d)
  Eigen::VectorXd targets_;  // b_j = j^-eta
  Eigen::VectorXd scale_;    // j^-rho
  double label_noise_ = 0.0;
};

// The same regression split across experts that share the embedding; samples
// are routed to experts with Zipf-decaying probabilities, so tail experts see
// long stretches with no gradient at all.
struct MoeConfig {
  PlrfConfig base;
  int experts = 1;
  double zipf = 1.0;
};

class MoePlrfProblem {
public:
  static MoePlrfProblem build(const MoeConfig& cfg);

  const PlrfProblem& base() const { return base_; }
  int experts() const { return static_cast<int>(routing_.size()); }
  const Eigen::VectorXd& routing() const { return routing_; }

  // expert index per sample; consumes no randomness when there is one expert
  std::vector<int> route(int batch, Rng& rng) const;
  // per-expert mean gradient over the samples routed to it, d x experts;
  // unrouted experts stay exactly zero
  Eigen::MatrixXd routed_grad(const Eigen::MatrixXd& theta, const Batch& batch,
                              const std::vector<int>& route) const;
  // routing-probability-weighted risk across experts
  double population_risk(const Eigen::MatrixXd& theta) const;

private:
  PlrfProblem base_;
  Eigen::VectorXd routing_;
  Eigen::VectorXd routing_cdf_;
};

struct TrainOptions {
  long long iterations = 0;
  int batch = 1;
  long long eval_every = 100;
  std::uint64_t seed = 1;
  double divergence_factor = 1e6;  // flag when risk exceeds this times initial
};

enum class RunStatus { Completed, Diverged };

// risk trace at evaluation points; divergence is a recorded outcome
struct RunRecord {
  std::vector<long long> iteration;
  std::vector<double> risk;
  std::vector<long long> samples;  // cumulative samples consumed
  std::vector<double> wall_ms;     // cumulative wall time at each eval
  RunStatus status = RunStatus::Completed;
  std::string note;
  long long samples_consumed = 0;
};

RunRecord run_training(const PlrfProblem& problem, const OptimizerConfig& opt,
                       const TrainOptions& opts);
RunRecord run_training(const MoePlrfProblem& problem, const OptimizerConfig& opt,
                       const TrainOptions& opts);

}  // namespace optlab
