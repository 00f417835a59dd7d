#include <optlab/zprocess.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <optlab/errors.hpp>
#include <optlab/summation.hpp>

namespace optlab {

ZProcessResult simulate_z(const ZProcessConfig& cfg) {
  if (cfg.p <= 0.0 || cfg.p > 1.0) throw std::invalid_argument("zprocess: p must lie in (0,1]");
  if (cfg.windows < 1) throw std::invalid_argument("zprocess: windows must be >= 1");
  if (cfg.trials < 1) throw std::invalid_argument("zprocess: trials must be >= 1");
  if (cfg.eps <= 0.0) throw std::invalid_argument("zprocess: eps must be > 0");
  if (cfg.censor <= 0.0) throw std::invalid_argument("zprocess: censor must be > 0");

  // generous cap: the chance of any window running past 40/p is ~e^-40
  const long long cap = cfg.max_steps > 0
                            ? cfg.max_steps
                            : static_cast<long long>((cfg.windows + 1) *
                                                     std::max(1000.0, 40.0 / cfg.p));

  const int nw = cfg.windows;
  // Welford accumulators: identical samples must give exactly zero spread
  std::vector<double> mean(nw, 0.0), m2(nw, 0.0), max_abs(nw, 0.0);
  std::vector<long long> censored(nw, 0), gap_total(nw, 0), closed(nw, 0);

  Rng rng(cfg.seed);
  std::vector<double> buf;
  buf.reserve(1024);

  for (long long trial = 0; trial < cfg.trials; ++trial) {
    double m = 0.0, v = 0.0;
    int window = 0;          // 0 until the first arrival
    long long window_start = 0;
    long long arrivals = 0;

    const auto close_window = [&](long long now) {
      const double z_raw = pairwise_sum(buf);
      double z = std::abs(z_raw);
      const bool over = !(z <= cfg.censor);  // catches inf/nan too
      if (over) z = cfg.censor;
      const int idx = window - 1;
      ++closed[idx];
      const double delta = z - mean[idx];
      mean[idx] += delta / static_cast<double>(closed[idx]);
      m2[idx] += delta * (z - mean[idx]);
      max_abs[idx] = std::max(max_abs[idx], z);
      if (over) ++censored[idx];
      gap_total[idx] += now - window_start;
      buf.clear();
    };

    for (long long step = 1; step <= cap; ++step) {
      const bool arrive = rng.bernoulli(cfg.p);
      double g = 0.0;
      if (arrive) g = cfg.law == GradientLaw::Unit ? 1.0 : rng.normal();
      const double td = static_cast<double>(step - 1);
      const double b1 = eval_schedule(cfg.beta1, td);
      const double b2 = eval_schedule(cfg.beta2, td);
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g * g;

      if (arrive) {
        ++arrivals;
        if (window >= 1) close_window(step);
        if (arrivals > static_cast<long long>(nw)) break;  // all windows closed
        window = static_cast<int>(arrivals);
        window_start = step;
      }
      if (window >= 1) buf.push_back(m / (std::sqrt(v) + cfg.eps));
    }
    // a trial that hits the cap abandons its open window; with the default
    // cap this is vanishingly rare and intentionally ignored
    buf.clear();
  }

  ZProcessResult out;
  out.trials = cfg.trials;
  for (int i = 0; i < nw; ++i) {
    ZWindowStats w;
    w.window = i + 1;
    const double n = static_cast<double>(std::max<long long>(closed[i], 1));
    w.mean_abs = mean[i];
    const double var = std::max(0.0, m2[i] / n);
    w.se = std::sqrt(var / n);
    w.max_abs = max_abs[i];
    w.censored_frac = static_cast<double>(censored[i]) / n;
    w.mean_gap = static_cast<double>(gap_total[i]) / n;
    out.windows.push_back(w);
  }
  return out;
}

double bound_constant_rates(double beta1, double beta2) {
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
    throw StabilityConditionError("bound: rates must satisfy 0 <= beta1 < 1, 0 < beta2 < 1");
  }
  if (beta1 * beta1 >= beta2) {
    throw StabilityConditionError("bound: needs beta1^2 < beta2, got beta1=" +
                                  std::to_string(beta1) + " beta2=" + std::to_string(beta2));
  }
  const double contraction = 1.0 - beta1 / std::sqrt(beta2);
  return (1.0 - beta1) / (std::sqrt(1.0 - beta2) * contraction * contraction);
}

StabilityReport classify_stability(const std::vector<ZGridPoint>& grid, long long trials) {
  if (grid.size() < 3) throw std::invalid_argument("classify: need at least three grid points");
  if (trials < 1000) throw std::invalid_argument("classify: need at least 1e3 trials per point");
  double pmin = grid.front().p, pmax = grid.front().p;
  for (const ZGridPoint& g : grid) {
    if (g.p <= 0.0 || g.p > 1.0) throw std::invalid_argument("classify: p must lie in (0,1]");
    if (g.mean_abs <= 0.0) throw std::invalid_argument("classify: mean |Z| must be > 0");
    pmin = std::min(pmin, g.p);
    pmax = std::max(pmax, g.p);
  }
  // three decade values inclusive, e.g. {0.1, 0.01, 0.001}
  if (pmax / pmin < 99.0) {
    throw std::invalid_argument("classify: p grid must cover at least three decades");
  }

  // least squares of log10 E|Z| on log10(1/p), linear for the slope and
  // quadratic (around the centered abscissa) for the trend curvature
  const double n = static_cast<double>(grid.size());
  double sx = 0.0;
  for (const ZGridPoint& g : grid) sx += -std::log10(g.p);
  const double xbar = sx / n;
  double s2 = 0.0, s3 = 0.0, s4 = 0.0, sy = 0.0, sxy = 0.0, sx2y = 0.0;
  for (const ZGridPoint& g : grid) {
    const double x = -std::log10(g.p) - xbar;
    const double y = std::log10(g.mean_abs);
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
    sy += y;
    sxy += x * y;
    sx2y += x * x * y;
  }
  const double slope = sxy / s2;
  // solve the 2x2 system the centered quadratic term leaves after
  // eliminating the intercept
  const double a11 = s2, a12 = s3, a21 = s3, a22 = s4 - s2 * s2 / n;
  const double b1 = sxy, b2 = sx2y - s2 * sy / n;
  const double det = a11 * a22 - a12 * a21;
  const double curvature = det != 0.0 ? (a11 * b2 - a21 * b1) / det : 0.0;

  StabilityReport rep;
  rep.slope = slope;
  rep.curvature = curvature;
  bool any_censored = false;
  for (const ZGridPoint& g : grid) {
    if (g.censored_frac > 0.01) any_censored = true;
  }
  if (any_censored) {
    // censored means are lower bounds, so growth can only be worse
    rep.verdict = StabilityVerdict::Divergent;
  } else if (slope >= 0.35 && slope <= 0.65) {
    rep.verdict = StabilityVerdict::SqrtP;
  } else if (slope < 0.15 && curvature <= 0.02) {
    rep.verdict = StabilityVerdict::Bounded;
  } else {
    rep.verdict = StabilityVerdict::Divergent;
  }
  return rep;
}

}  // namespace optlab
