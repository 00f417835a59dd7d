#include <optlab/plrf.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <optlab/errors.hpp>

namespace optlab {

PlrfProblem PlrfProblem::build(const PlrfConfig& cfg) {
  if (cfg.dims <= 0) throw std::invalid_argument("plrf: dims must be > 0");
  if (cfg.features < 0) throw std::invalid_argument("plrf: features must be >= 0");
  if (cfg.label_noise < 0.0) throw std::invalid_argument("plrf: label_noise must be >= 0");
  const int d = cfg.dims;
  const int v = cfg.features == 0 ? 3 * cfg.dims : cfg.features;

  PlrfProblem p;
  p.embed_.resize(v, d);
  Rng rng(cfg.seed);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  // row-major fill order is part of the reproducibility contract
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < d; ++j) p.embed_(i, j) = rng.normal() * inv_sqrt_d;
  }
  p.targets_.resize(v);
  p.scale_.resize(v);
  for (int j = 0; j < v; ++j) {
    p.targets_[j] = std::pow(static_cast<double>(j + 1), -cfg.eta);
    p.scale_[j] = std::pow(static_cast<double>(j + 1), -cfg.rho);
  }
  p.label_noise_ = cfg.label_noise;
  return p;
}

Batch PlrfProblem::sample_batch(int batch, Rng& rng) const {
  if (batch <= 0) throw std::invalid_argument("plrf: batch must be > 0");
  const int v = features();
  Batch b;
  b.x.resize(v, batch);
  b.y.resize(batch);
  for (int k = 0; k < batch; ++k) {
    for (int j = 0; j < v; ++j) b.x(j, k) = scale_[j] * rng.normal();
    b.y[k] = targets_.dot(b.x.col(k));
    if (label_noise_ > 0.0) b.y[k] += label_noise_ * rng.normal();
  }
  return b;
}

double PlrfProblem::batch_loss(const Eigen::VectorXd& theta, const Batch& batch) const {
  const Eigen::VectorXd pred = embed_ * theta;
  double total = 0.0;
  for (int k = 0; k < batch.x.cols(); ++k) {
    const double e = pred.dot(batch.x.col(k)) - batch.y[k];
    total += 0.5 * e * e;
  }
  return total / static_cast<double>(batch.x.cols());
}

Eigen::VectorXd PlrfProblem::stochastic_grad(const Eigen::VectorXd& theta,
                                             const Batch& batch) const {
  if (theta.size() != dims()) throw std::invalid_argument("plrf: theta has wrong dimension");
  const int nb = static_cast<int>(batch.x.cols());
  const Eigen::VectorXd pred = embed_ * theta;
  Eigen::VectorXd weighted = Eigen::VectorXd::Zero(features());
  for (int k = 0; k < nb; ++k) {
    const double e = pred.dot(batch.x.col(k)) - batch.y[k];
    weighted.noalias() += e * batch.x.col(k);
  }
  return embed_.transpose() * (weighted / static_cast<double>(nb));
}

double PlrfProblem::population_risk(const Eigen::VectorXd& theta) const {
  if (theta.size() != dims()) throw std::invalid_argument("plrf: theta has wrong dimension");
  const Eigen::VectorXd resid = embed_ * theta - targets_;
  return 0.5 * (scale_.array() * resid.array()).square().sum();
}

MoePlrfProblem MoePlrfProblem::build(const MoeConfig& cfg) {
  if (cfg.experts <= 0) throw std::invalid_argument("plrf: experts must be > 0");
  if (cfg.zipf < 0.0) throw std::invalid_argument("plrf: zipf exponent must be >= 0");
  MoePlrfProblem m;
  m.base_ = PlrfProblem::build(cfg.base);
  m.routing_.resize(cfg.experts);
  for (int i = 0; i < cfg.experts; ++i) {
    m.routing_[i] = std::pow(static_cast<double>(i + 1), -cfg.zipf);
  }
  m.routing_ /= m.routing_.sum();
  m.routing_cdf_.resize(cfg.experts);
  double acc = 0.0;
  for (int i = 0; i < cfg.experts; ++i) {
    acc += m.routing_[i];
    m.routing_cdf_[i] = acc;
  }
  m.routing_cdf_[cfg.experts - 1] = 1.0;
  return m;
}

std::vector<int> MoePlrfProblem::route(int batch, Rng& rng) const {
  std::vector<int> out(batch, 0);
  if (experts() == 1) return out;  // no randomness consumed
  const double* begin = routing_cdf_.data();
  const double* end = begin + routing_cdf_.size();
  for (int k = 0; k < batch; ++k) {
    const double u = rng.uniform();
    out[k] = static_cast<int>(std::upper_bound(begin, end, u) - begin);
    if (out[k] >= experts()) out[k] = experts() - 1;
  }
  return out;
}

Eigen::MatrixXd MoePlrfProblem::routed_grad(const Eigen::MatrixXd& theta, const Batch& batch,
                                            const std::vector<int>& route) const {
  const int d = base_.dims();
  const int m = experts();
  if (theta.rows() != d || theta.cols() != m) {
    throw std::invalid_argument("plrf: expert matrix has wrong shape");
  }
  if (route.size() != static_cast<std::size_t>(batch.x.cols())) {
    throw std::invalid_argument("plrf: route length does not match batch");
  }
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(d, m);
  if (m == 1) {
    grad.col(0) = base_.stochastic_grad(theta.col(0), batch);
    return grad;
  }

  // residuals per sample against the routed expert's predictor
  std::vector<int> counts(m, 0);
  for (int r : route) {
    if (r < 0 || r >= m) throw std::invalid_argument("plrf: route index out of range");
    ++counts[r];
  }
  Eigen::MatrixXd weighted = Eigen::MatrixXd::Zero(base_.features(), m);
  Eigen::VectorXd pred;
  std::vector<char> have(m, 0);
  std::vector<Eigen::VectorXd> pred_cache(m);
  for (int k = 0; k < batch.x.cols(); ++k) {
    const int r = route[k];
    if (!have[r]) {
      pred_cache[r] = base_.embed() * theta.col(r);
      have[r] = 1;
    }
    const double e = pred_cache[r].dot(batch.x.col(k)) - batch.y[k];
    weighted.col(r).noalias() += e * batch.x.col(k);
  }
  for (int i = 0; i < m; ++i) {
    if (counts[i] == 0) continue;
    grad.col(i).noalias() =
        base_.embed().transpose() * (weighted.col(i) / static_cast<double>(counts[i]));
  }
  return grad;
}

double MoePlrfProblem::population_risk(const Eigen::MatrixXd& theta) const {
  const int m = experts();
  if (theta.rows() != base_.dims() || theta.cols() != m) {
    throw std::invalid_argument("plrf: expert matrix has wrong shape");
  }
  if (m == 1) return base_.population_risk(theta.col(0));
  const Eigen::MatrixXd pred = base_.embed() * theta;  // v x m
  const auto scale = base_.feature_scale().array();
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const double risk_i =
        0.5 * (scale * (pred.col(i) - base_.targets()).array()).square().sum();
    total += routing_[i] * risk_i;
  }
  return total;
}

namespace {

template <typename ThetaInit, typename GradFn, typename RiskFn>
RunRecord train_loop(const OptimizerConfig& opt, const TrainOptions& opts, ThetaInit init,
                     GradFn grad_at, RiskFn risk_of) {
  if (opts.iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
  if (opts.batch <= 0) throw std::invalid_argument("train: batch must be > 0");
  if (opts.eval_every <= 0) throw std::invalid_argument("train: eval_every must be > 0");

  RunRecord rec;
  ParamBlock block = init();
  OptimizerDriver driver(opt);
  Rng rng(opts.seed);

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&start]() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  };
  const double initial = risk_of(block.values);
  rec.iteration.push_back(0);
  rec.risk.push_back(initial);
  rec.samples.push_back(0);
  rec.wall_ms.push_back(elapsed_ms());

  for (long long t = 0; t < opts.iterations; ++t) {
    try {
      const Eigen::ArrayXd& q = driver.query_point(block);
      driver.apply(block, grad_at(q, rng));
    } catch (const RejectedStepError& e) {
      rec.status = RunStatus::Diverged;
      rec.note = e.what();
      rec.samples_consumed = (t + 1) * opts.batch;
      return rec;
    }
    rec.samples_consumed = (t + 1) * opts.batch;
    const bool at_eval = ((t + 1) % opts.eval_every == 0) || (t + 1 == opts.iterations);
    if (!at_eval) continue;
    const double risk = risk_of(block.values);
    rec.iteration.push_back(t + 1);
    rec.risk.push_back(risk);
    rec.samples.push_back(rec.samples_consumed);
    rec.wall_ms.push_back(elapsed_ms());
    if (!std::isfinite(risk) || risk > opts.divergence_factor * initial) {
      rec.status = RunStatus::Diverged;
      rec.note = "risk blew past the divergence threshold at step " + std::to_string(t + 1);
      return rec;
    }
  }
  return rec;
}

}  // namespace

RunRecord run_training(const PlrfProblem& problem, const OptimizerConfig& opt,
                       const TrainOptions& opts) {
  const int d = problem.dims();
  return train_loop(
      opt, opts, [d]() { return ParamBlock::vector(d); },
      [&problem, &opts](const Eigen::ArrayXd& q, Rng& rng) -> Eigen::ArrayXd {
        const Batch b = problem.sample_batch(opts.batch, rng);
        return problem.stochastic_grad(q.matrix(), b).array();
      },
      [&problem](const Eigen::ArrayXd& theta) {
        return problem.population_risk(theta.matrix());
      });
}

RunRecord run_training(const MoePlrfProblem& problem, const OptimizerConfig& opt,
                       const TrainOptions& opts) {
  const int d = problem.base().dims();
  const int m = problem.experts();
  return train_loop(
      opt, opts, [d, m]() { return ParamBlock::matrix(d, m); },
      [&problem, &opts, d, m](const Eigen::ArrayXd& q, Rng& rng) -> Eigen::ArrayXd {
        const Batch b = problem.base().sample_batch(opts.batch, rng);
        const std::vector<int> r = problem.route(opts.batch, rng);
        const Eigen::Map<const Eigen::MatrixXd> theta(q.data(), d, m);
        const Eigen::MatrixXd g = problem.routed_grad(theta, b, r);
        return Eigen::Map<const Eigen::ArrayXd>(g.data(), g.size());
      },
      [&problem, d, m](const Eigen::ArrayXd& theta) {
        const Eigen::Map<const Eigen::MatrixXd> mat(theta.data(), d, m);
        return problem.population_risk(mat);
      });
}

}  // namespace optlab
