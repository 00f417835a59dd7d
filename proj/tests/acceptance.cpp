// Final acceptance gates. Each numbered check prints exactly one PASS or FAIL
// line; pass a number to run a single check, no argument runs them all.
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <optlab/newton_schulz.hpp>
#include <optlab/optimizers.hpp>
#include <optlab/plrf.hpp>
#include <optlab/rng.hpp>
#include <optlab/scaling.hpp>
#include <optlab/schedules.hpp>
#include <optlab/zprocess.hpp>

using namespace optlab;

namespace {

// peak rates and horizons pinned from the sweeps in tools/calibrate.cpp
constexpr double kPhaseAdamRate = 3e-3;
constexpr double kPhaseAdanaRate = 3e-3;
constexpr long long kPhaseIters = 100000;
constexpr double kMoeRate = 3e-3;
constexpr long long kMoeIters = 20000;
constexpr double kMatchRate = 3e-3;
constexpr long long kMatchIters = 20000;

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

PlrfConfig phase_problem(std::uint64_t seed) {
  PlrfConfig p;
  p.dims = 400;
  p.features = 1200;
  p.rho = 1.25;
  p.eta = 0.75;
  p.seed = seed * 7919 + 13;
  return p;
}

// 1. momentum-exponent phase structure on the random-features model
std::string crit_phase_structure() {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    TrainOptions topt;
    topt.iterations = kPhaseIters;
    topt.eval_every = 2000;
    topt.seed = seed;
    const PlrfProblem prob = PlrfProblem::build(phase_problem(seed));

    const RunRecord adam = run_training(prob, adamw_config(kPhaseAdamRate), topt);
    if (adam.status != RunStatus::Completed)
      return "seed " + std::to_string(seed) + ": baseline diverged";
    const double base = adam.risk.back();

    for (double kappa : {0.2, 0.3}) {
      const RunRecord r = run_training(prob, adana_config(kPhaseAdanaRate, kappa), topt);
      if (r.status != RunStatus::Diverged)
        return "seed " + std::to_string(seed) + " kappa " + fmt(kappa) +
               ": expected divergence, final risk " + fmt(r.risk.back());
    }
    for (double kappa : {0.5, 0.7, 0.85}) {
      const RunRecord r = run_training(prob, adana_config(kPhaseAdanaRate, kappa), topt);
      if (r.status != RunStatus::Completed || !(r.risk.back() < base))
        return "seed " + std::to_string(seed) + " kappa " + fmt(kappa) + ": final risk " +
               fmt(r.risk.back()) + " not below baseline " + fmt(base);
    }
    const RunRecord r = run_training(prob, adana_config(kPhaseAdanaRate, 1.0), topt);
    if (r.status != RunStatus::Completed || r.risk.back() > 1.2 * base ||
        r.risk.back() < base / 1.2)
      return "seed " + std::to_string(seed) + " kappa 1: final risk " + fmt(r.risk.back()) +
             " not within 20% of baseline " + fmt(base);
  }
  return "";
}

// 2. sparse-gradient hardening on the expert-routed model
std::string crit_moe_hardening() {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    MoeConfig mc;
    mc.base.dims = 333;
    mc.base.features = 1000;
    mc.base.rho = 1.5;
    mc.base.eta = 0.75;
    mc.base.seed = seed * 7919 + 13;
    mc.experts = 1000;
    mc.zipf = 1.0;
    const MoePlrfProblem prob = MoePlrfProblem::build(mc);

    TrainOptions topt;
    topt.iterations = kMoeIters;
    topt.batch = 10;
    topt.eval_every = 500;
    topt.seed = seed;

    const RunRecord naive = run_training(prob, log_nadamw_config(kMoeRate), topt);
    if (naive.status != RunStatus::Diverged)
      return "seed " + std::to_string(seed) + ": log-nadamw expected to diverge, final " +
             fmt(naive.risk.back());

    OptimizerConfig const_b2 = adana_config(kMoeRate, 0.85);
    const_b2.beta2 = constant_schedule(0.999);
    const RunRecord frozen = run_training(prob, const_b2, topt);
    if (frozen.status != RunStatus::Diverged)
      return "seed " + std::to_string(seed) + ": constant-beta2 variant expected to diverge, " +
             "final " + fmt(frozen.risk.back());

    const RunRecord hard = run_training(prob, dana_star_mk4_config(kMoeRate, 0.85), topt);
    if (hard.status != RunStatus::Completed || !std::isfinite(hard.risk.back()))
      return "seed " + std::to_string(seed) + ": hardened variant did not finish finite (" +
             hard.note + ")";
  }
  return "";
}

// 3. trichotomy of the sparse-arrival moment-ratio process
std::string crit_z_trichotomy() {
  const std::vector<double> ps = {1e-1, 1e-2, 1e-3};
  struct Pair {
    const char* name;
    ScheduleSpec b1, b2;
    StabilityVerdict want;
  };
  const Pair pairs[] = {
      {"constant rates", constant_schedule(0.9), constant_schedule(0.999),
       StabilityVerdict::Bounded},
      {"log-time both", log_time_beta(8.0), log_time_beta(8.0), StabilityVerdict::SqrtP},
      {"log-time first only", log_time_beta(8.0), constant_schedule(0.999),
       StabilityVerdict::Divergent},
  };

  double const_pair_max = 0.0;
  int idx = 0;
  for (const Pair& pair : pairs) {
    ZProcessConfig cfg;
    cfg.beta1 = pair.b1;
    cfg.beta2 = pair.b2;
    cfg.windows = 2;
    cfg.trials = 10000;
    cfg.seed = 11 + static_cast<std::uint64_t>(idx);

    std::vector<ZGridPoint> grid;
    for (double p : ps) {
      cfg.p = p;
      const ZProcessResult res = simulate_z(cfg);
      const ZWindowStats& w = res.windows.at(1);
      grid.push_back({p, w.mean_abs, w.censored_frac});
      if (idx == 0) {
        for (const ZWindowStats& ws : res.windows)
          const_pair_max = std::max(const_pair_max, ws.max_abs);
      }
    }
    const StabilityReport rep = classify_stability(grid, cfg.trials);
    if (rep.verdict != pair.want)
      return std::string(pair.name) + ": wrong verdict (slope " + fmt(rep.slope) + ")";
    ++idx;
  }
  if (!(const_pair_max <= 319.1))
    return "constant-rate |Z| reached " + fmt(const_pair_max) + ", above the closed-form bound";
  return "";
}

// 4. equivalence of the accelerated-step formulations on a quadratic
std::string crit_nesterov_forms() {
  const Eigen::ArrayXd curv = (Eigen::ArrayXd(3) << 1.0, 0.25, 0.04).finished();

  OptimizerConfig two = nesterov_config(0.1, NesterovForm::TwoSequence);
  OptimizerConfig one = nesterov_config(0.1, NesterovForm::ExtraGradient);
  ParamBlock pt = ParamBlock::vector(3), po = ParamBlock::vector(3);
  pt.values << 1.0, -2.0, 0.5;
  po.values = pt.values;
  OptimizerState st_t, st_o;
  double worst = 0.0;
  for (long long t = 0; t < 1000; ++t) {
    Eigen::ArrayXd yq = pt.values;
    if (st_t.aux.size()) yq = st_t.aux;
    step_nesterov(pt, st_t, curv * yq, t, two);
    step_nesterov(po, st_o, curv * po.values, t, one);
    worst = std::max(worst, (st_t.aux - po.values).abs().maxCoeff());
  }
  if (!(worst <= 1e-10)) return "pair/single forms drift apart: " + fmt(worst);

  OptimizerConfig ema = nesterov_config(0.05, NesterovForm::MomentumEma);
  ema.beta1 = log_time_beta(3.0);
  OptimizerConfig pairf = nesterov_config(0.05, NesterovForm::TwoSequence);
  ParamBlock pp = ParamBlock::vector(1), pe = ParamBlock::vector(1);
  pp.values[0] = 1.0;
  pe.values = pp.values;
  OptimizerState st_p, st_e;
  double gap_early = 0.0, gap_late = 0.0;
  for (long long t = 0; t < 1000; ++t) {
    Eigen::ArrayXd yq = pp.values;
    if (st_p.aux.size()) yq = st_p.aux;
    step_nesterov(pp, st_p, yq, t, pairf);
    step_nesterov(pe, st_e, pe.values, t, ema);
    const double gap = std::abs(st_p.aux[0] - pe.values[0]);
    if (t == 9) gap_early = gap;
    if (t == 999) gap_late = gap;
  }
  if (!(gap_late < gap_early))
    return "averaged-form gap grew: " + fmt(gap_early) + " -> " + fmt(gap_late);
  return "";
}

// 5. two-speed mixing with a zero short window matches constant-form damping
std::string crit_two_speed_match() {
  PlrfConfig pc;
  pc.dims = 200;
  pc.features = 600;
  pc.rho = 1.25;
  pc.eta = 0.75;
  pc.seed = 99;
  const PlrfProblem prob = PlrfProblem::build(pc);
  TrainOptions topt;
  topt.iterations = kMatchIters;
  topt.eval_every = 500;
  topt.seed = 7;

  const double horizon = static_cast<double>(kMatchIters);
  const double kappa = 0.85;
  const OptimizerConfig mix =
      ademamix_config(kMatchRate, horizon, 1.0 - 8.0 / horizon, 0.999, 0.0,
                      std::pow(horizon, 1.0 - kappa), horizon);
  OptimizerConfig adana = adana_config(kMatchRate, kappa);
  adana.damping = damping_constant(kappa, horizon);

  const RunRecord a = run_training(prob, mix, topt);
  const RunRecord b = run_training(prob, adana, topt);
  if (a.status != RunStatus::Completed) return "two-speed run diverged";
  if (b.status != RunStatus::Completed) return "constant-damping run diverged";
  const double ra = a.risk.back(), rb = b.risk.back();
  if (!(std::abs(ra - rb) <= 0.05 * std::min(ra, rb)))
    return "final risks " + fmt(ra) + " vs " + fmt(rb) + " differ by more than 5%";
  return "";
}

// 6. exact parameter/token table for the scaling ladder
std::string crit_ladder_integers() {
  struct Row {
    int heads;
    long long p, d, n;
  };
  const Row rows[] = {
      {14, 96337920LL, 186482688LL, 3729653760LL},
      {16, 150994944LL, 254017536LL, 5080350720LL},
      {24, 509607936LL, 664141824LL, 13282836480LL},
      {32, 1207959552LL, 1414004736LL, 28280094720LL},
      {40, 2359296000LL, 2616852480LL, 52337049600LL},
  };
  for (const Row& row : rows) {
    const ArchSpec a = arch_from_heads(row.heads);
    const long long p = nonembedding_params(a);
    const long long d = total_params(a);
    const ChinchillaPlan plan = chinchilla_plan(d, 1);
    if (p != row.p || d != row.d || plan.tokens != row.n) {
      return "heads " + std::to_string(row.heads) + ": got P=" + std::to_string(p) +
             " D=" + std::to_string(d) + " N=" + std::to_string(plan.tokens);
    }
  }
  return "";
}

// 7. saturating learning-rate law round trip on the ladder sizes
std::string crit_lr_roundtrip() {
  const double a = 12.8, b = 1.67e4, d = -0.515;
  std::vector<LrPoint> clean, noisy;
  Rng rng(2026);
  int id = 0;
  for (int heads : {14, 16, 24, 32, 40}) {
    LrPoint pt;
    pt.params = static_cast<double>(nonembedding_params(arch_from_heads(heads)));
    pt.lr = a * std::pow(b + pt.params, d);
    pt.size_id = id;
    clean.push_back(pt);
    // four noisy probes per size, the shape of a real rate sweep
    for (int k = 0; k < 4; ++k) {
      LrPoint noisy_pt = pt;
      noisy_pt.lr *= std::exp(0.02 * rng.normal());
      noisy.push_back(noisy_pt);
    }
    ++id;
  }

  const LrFit noisy_fit = fit_saturated_lr(noisy);
  if (noisy_fit.d < -0.545 || noisy_fit.d > -0.485)
    return "noisy exponent " + fmt(noisy_fit.d) + " outside [-0.545, -0.485]";

  const LrFit clean_fit = fit_saturated_lr(clean);
  const double predicted = eval_saturated_lr(clean_fit, 2.36e9);
  if (!(std::abs(predicted - 1.91e-4) <= 0.02 * 1.91e-4))
    return "clean-fit rate at 2.36e9 params is " + fmt(predicted);
  return "";
}

// 8. broken power law with a shared floor across two synthetic curves
std::string crit_loss_roundtrip() {
  const double a = 0.291;
  const double b1 = 0.40, c1 = 0.20, e1 = 2.50, f1 = 0.03;
  const double b2 = 0.48, c2 = 0.24, e2 = 2.00, f2 = 0.035;
  std::vector<LossPoint> pts;
  for (int i = 0; i < 24; ++i) {
    const double c = 4.5e-4 * std::pow(8.6 / 4.5e-4, i / 23.0);
    pts.push_back({"first", c, a + b1 * std::pow(c, -c1) + e1 * std::pow(c, -f1)});
    pts.push_back({"second", c, a + b2 * std::pow(c, -c2) + e2 * std::pow(c, -f2)});
  }
  const LossFit fit = fit_loss_power_law(pts);
  const LossCurveFit& first = fit.curves.at(0);
  if (std::abs(first.c - c1) > 0.02) return "curvature exponent " + fmt(first.c);
  if (std::abs(first.f - f1) > 0.005) return "shallow exponent " + fmt(first.f);
  if (!(fit.r2 >= 0.999)) return "fit quality r2 " + fmt(fit.r2);
  return "";
}

// 9. compute-multiplier identities and the worked two-point example
std::string crit_multiplier_identities() {
  const std::vector<std::pair<double, double>> curve = {{1.0, 3.0}, {10.0, 2.0}, {100.0, 1.5}};
  const auto self = compute_multiplier(curve, curve);
  for (const MultiplierPoint& mp : self) {
    if (mp.multiplier != 1.0) return "self multiplier " + fmt(mp.multiplier) + " at one point";
    if (mp.efficiency != mp.multiplier - 1.0) return "efficiency is not multiplier minus one";
  }
  const auto ex = compute_multiplier({{1.0, 3.0}, {10.0, 2.0}}, {{1.0, 2.5}});
  const double m = ex.at(0).multiplier;
  if (std::abs(m - std::pow(10.0, 0.5)) > 1e-12 || std::abs(m - 3.1623) > 5e-5)
    return "two-point example gave " + fmt(m);
  return "";
}

// 10. gradient and risk oracles on random problem instances
std::string crit_oracles() {
  Rng master(424242);
  for (int rep = 0; rep < 100; ++rep) {
    PlrfConfig pc;
    pc.dims = 3 + static_cast<int>(master.index(10));
    pc.seed = master.next_u64();
    const PlrfProblem prob = PlrfProblem::build(pc);
    Rng rng(master.next_u64());
    const Batch batch = prob.sample_batch(1 + static_cast<int>(master.index(3)), rng);
    Eigen::VectorXd theta(pc.dims);
    for (int i = 0; i < pc.dims; ++i) theta[i] = 0.5 * rng.normal();

    const Eigen::VectorXd g = prob.stochastic_grad(theta, batch);
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    for (int i = 0; i < pc.dims; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
      Eigen::VectorXd tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      const double fd = (prob.batch_loss(tp, batch) - prob.batch_loss(tm, batch)) / (2.0 * h);
      if (std::abs(g[i] - fd) > 1e-5 * scale)
        return "instance " + std::to_string(rep) + ": gradient coordinate " + std::to_string(i) +
               " off by " + fmt(std::abs(g[i] - fd));
    }
  }

  for (int rep = 0; rep < 20; ++rep) {
    PlrfConfig pc;
    pc.dims = 3 + static_cast<int>(master.index(10));
    pc.seed = master.next_u64();
    const PlrfProblem prob = PlrfProblem::build(pc);
    Rng rng(master.next_u64());
    Eigen::VectorXd theta(pc.dims);
    for (int i = 0; i < pc.dims; ++i) theta[i] = 0.5 * rng.normal();
    const double pop = prob.population_risk(theta);

    const int n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (int k = 0; k < n; ++k) {
      const double loss = prob.batch_loss(theta, prob.sample_batch(1, rng));
      sum += loss;
      sumsq += loss * loss;
    }
    const double mean = sum / n;
    const double var = std::max(sumsq / n - mean * mean, 0.0);
    const double se = std::sqrt(var / n);
    if (std::abs(mean - pop) > 3.0 * se)
      return "instance " + std::to_string(rep) + ": monte carlo " + fmt(mean) +
             " vs closed form " + fmt(pop) + " (se " + fmt(se) + ")";
  }
  return "";
}

// 11. orthogonalizing iteration against the scalar recursion and an SVD oracle
std::string crit_newton_schulz() {
  // on the identity every singular value follows the quintic scalar recursion
  double s = 1.0 / (std::sqrt(2.0) + 1e-8);
  for (int k = 0; k < 5; ++k) s = 3.4445 * s - 4.7750 * s * s * s + 2.0315 * std::pow(s, 5);
  const Eigen::MatrixXd ns = newton_schulz(Eigen::MatrixXd::Identity(2, 2), 5);
  const double drift = (ns - s * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff();
  if (!(drift <= 1e-6))
    return "identity iterate differs from scalar recursion " + fmt(s) + " by " + fmt(drift);

  Rng rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::MatrixXd m(16, 32);
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();
    const Eigen::MatrixXd approx = newton_schulz(m, 5);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::MatrixXd polar = svd.matrixU() * svd.matrixV().transpose();
    const double rel = (approx - polar).norm() / polar.norm();
    if (!(rel <= 0.35))
      return "matrix " + std::to_string(rep) + ": polar-factor error " + fmt(rel);
  }
  return "";
}

struct Gate {
  int id;
  const char* name;
  std::function<std::string()> run;
};

const Gate kGates[] = {
    {1, "kappa phase structure on the random-features model", crit_phase_structure},
    {2, "sparse-gradient hardening on the expert-routed model", crit_moe_hardening},
    {3, "moment-ratio process trichotomy", crit_z_trichotomy},
    {4, "accelerated-step formulation equivalence", crit_nesterov_forms},
    {5, "two-speed mixing matches constant-form damping", crit_two_speed_match},
    {6, "scaling-ladder parameter and token integers", crit_ladder_integers},
    {7, "saturating learning-rate law round trip", crit_lr_roundtrip},
    {8, "broken power-law round trip with shared floor", crit_loss_roundtrip},
    {9, "compute-multiplier identities", crit_multiplier_identities},
    {10, "gradient and risk oracles", crit_oracles},
    {11, "orthogonalizing iteration accuracy", crit_newton_schulz},
};

}  // namespace

int main(int argc, char** argv) {
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  bool all_pass = true;
  for (const Gate& gate : kGates) {
    if (only != 0 && gate.id != only) continue;
    std::string detail;
    try {
      detail = gate.run();
    } catch (const std::exception& e) {
      detail = std::string("unexpected error: ") + e.what();
    }
    if (detail.empty()) {
      std::printf("criterion %2d PASS  %s\n", gate.id, gate.name);
    } else {
      std::printf("criterion %2d FAIL  %s: %s\n", gate.id, gate.name, detail.c_str());
      all_pass = false;
    }
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
