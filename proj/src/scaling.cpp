#include <optlab/scaling.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Dense>

#include <optlab/errors.hpp>
#include <optlab/rng.hpp>

namespace optlab {

ArchSpec arch_from_heads(int heads) {
  if (heads < 1) throw std::invalid_argument("arch_from_heads: heads must be positive");
  ArchSpec a;
  a.n_head = heads;
  a.n_embd = 64LL * heads;
  a.n_layer = (3LL * heads) / 4;
  return a;
}

long long nonembedding_params(const ArchSpec& a) {
  if (a.n_layer < 1 || a.n_embd < 1)
    throw std::invalid_argument("nonembedding_params: layer and width must be positive");
  return 12LL * a.n_layer * a.n_embd * a.n_embd;
}

long long total_params(const ArchSpec& a, bool two_sided_embeddings) {
  const long long sides = two_sided_embeddings ? 2 : 1;
  return nonembedding_params(a) + sides * a.n_embd * a.vocab;
}

long long flops_per_token(const ArchSpec& a, FlopsConvention conv) {
  const long long p = nonembedding_params(a);
  switch (conv) {
    case FlopsConvention::SixP:
      return 6LL * p;
    case FlopsConvention::SixN:
      return 6LL * (p + a.n_embd * a.vocab);
    case FlopsConvention::Marginal:
      return 6LL * p + 12LL * a.n_layer * a.n_embd * a.seq_len;
  }
  throw std::invalid_argument("flops_per_token: unknown convention");
}

ChinchillaPlan chinchilla_plan(long long params, long long tokens_per_batch) {
  if (params < 1) throw std::invalid_argument("chinchilla_plan: params must be positive");
  if (tokens_per_batch < 1)
    throw std::invalid_argument("chinchilla_plan: tokens_per_batch must be positive");
  ChinchillaPlan plan;
  plan.tokens = 20LL * params;
  plan.iterations = plan.tokens / tokens_per_batch;
  return plan;
}

namespace {

struct MinimizeResult {
  double loss = 0.0;
  long long iters = 0;
  bool converged = false;
};

// plain adagrad on an unconstrained parameter vector; eval fills the gradient
// and returns the loss. Stops once the loss has not improved by tol for a
// thousand consecutive steps, and hands back the best iterate seen.
template <typename Eval>
MinimizeResult minimize_adagrad(std::vector<double>& x, Eval&& eval, long long max_iters,
                                double step, double tol) {
  const std::size_t n = x.size();
  std::vector<double> accum(n, 0.0), grad(n, 0.0), best_x = x;
  double best = std::numeric_limits<double>::infinity();
  long long stale = 0;
  MinimizeResult out;
  for (long long it = 0; it < max_iters; ++it) {
    const double loss = eval(x, grad);
    if (loss < best - tol) {
      best = loss;
      best_x = x;
      stale = 0;
    } else {
      if (loss < best) {
        best = loss;
        best_x = x;
      }
      if (++stale >= 1000) {
        out.converged = true;
        out.iters = it + 1;
        break;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      accum[i] += grad[i] * grad[i];
      x[i] -= step * grad[i] / (std::sqrt(accum[i]) + 1e-12);
    }
    out.iters = it + 1;
  }
  x = best_x;
  out.loss = best;
  return out;
}

}  // namespace

LrFit fit_saturated_lr(const std::vector<LrPoint>& pts, const LrFitOptions& opts) {
  if (pts.empty()) throw std::invalid_argument("fit_saturated_lr: no points");
  for (const auto& p : pts) {
    if (!(p.params > 0.0) || !std::isfinite(p.params))
      throw std::invalid_argument("fit_saturated_lr: params must be positive");
    if (!(p.lr > 0.0) || !std::isfinite(p.lr))
      throw std::invalid_argument("fit_saturated_lr: lr must be positive");
    if (!(p.weight > 0.0)) throw std::invalid_argument("fit_saturated_lr: weight must be positive");
  }
  std::vector<double> sizes;
  for (const auto& p : pts) sizes.push_back(p.params);
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  if (sizes.size() < 2)
    throw RankDeficientError("fit_saturated_lr: need at least two distinct model sizes");

  const std::size_t n = pts.size();
  std::vector<double> logp(n), logy(n), w(n);
  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    logp[i] = std::log(pts[i].params);
    logy[i] = std::log(pts[i].lr);
    w[i] = pts[i].weight;
    wsum += w[i];
  }

  // with the offset fixed, log lr is linear in (log a, d), so the linear part
  // has a closed-form weighted regression and the fit reduces to a
  // one-dimensional search over log b
  auto profiled = [&](double logb, double* out_la, double* out_d) {
    const double b = std::exp(logb);
    std::vector<double> z(n);
    double mz = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = std::log(b + pts[i].params);
      mz += w[i] * z[i];
      my += w[i] * logy[i];
    }
    mz /= wsum;
    my /= wsum;
    double szz = 0.0, szy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      szz += w[i] * (z[i] - mz) * (z[i] - mz);
      szy += w[i] * (z[i] - mz) * (logy[i] - my);
    }
    // an offset far above the largest size flattens z out; steer away
    if (!(szz > 1e-18)) return std::numeric_limits<double>::infinity();
    const double d = szy / szz;
    const double la = my - d * mz;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = la + d * z[i] - logy[i];
      loss += (w[i] / wsum) * r * r;
    }
    if (out_la) *out_la = la;
    if (out_d) *out_d = d;
    return loss;
  };

  // coarse grid over log b, then golden-section refinement of the best cell;
  // the bracket runs from far below the smallest size (where the offset is
  // indistinguishable from zero) to well past the largest
  const double lo0 = std::log(sizes.front()) - 20.0;
  const double hi0 = std::log(sizes.back()) + 5.0;
  const long long budget = std::max<long long>(opts.max_iters, 16);
  const int coarse = static_cast<int>(std::min<long long>(160, budget / 2));
  long long evals = 0;
  double best_lb = lo0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int i = 0; i < coarse; ++i) {
    const double lb = lo0 + (hi0 - lo0) * i / (coarse - 1.0);
    const double cur = profiled(lb, nullptr, nullptr);
    ++evals;
    if (cur < best_loss) {
      best_loss = cur;
      best_lb = lb;
    }
  }
  const double cell = (hi0 - lo0) / (coarse - 1.0);
  double lo = best_lb - cell, hi = best_lb + cell;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = profiled(x1, nullptr, nullptr);
  double f2 = profiled(x2, nullptr, nullptr);
  evals += 2;
  bool converged = false;
  while (evals < budget) {
    if (hi - lo < 1e-12) {
      converged = true;
      break;
    }
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = profiled(x1, nullptr, nullptr);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = profiled(x2, nullptr, nullptr);
    }
    ++evals;
  }

  double la = 0.0, dhat = 0.0;
  const double lb = f1 < f2 ? x1 : x2;
  const double loss = profiled(lb, &la, &dhat);
  ++evals;

  LrFit fit;
  fit.a = std::exp(la);
  fit.b = std::exp(lb);
  fit.d = dhat;
  fit.loss = loss;
  fit.iters = evals;
  fit.converged = converged;
  return fit;
}

double eval_saturated_lr(const LrFit& fit, double params) {
  if (!(params > 0.0)) throw std::invalid_argument("eval_saturated_lr: params must be positive");
  return fit.a * std::pow(fit.b + params, fit.d);
}

BootstrapResult bootstrap_lr_fit(const std::vector<LrPoint>& pts,
                                 const std::vector<double>& queries,
                                 const LrFitOptions& fit_opts, const BootstrapOptions& boot_opts) {
  if (boot_opts.replicates < 1)
    throw std::invalid_argument("bootstrap_lr_fit: replicates must be positive");
  const LrFit full = fit_saturated_lr(pts, fit_opts);

  // group rows by size id so a replicate resamples whole model sizes
  std::vector<int> ids;
  std::unordered_map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto [it, fresh] = groups.try_emplace(pts[i].size_id);
    if (fresh) ids.push_back(pts[i].size_id);
    it->second.push_back(i);
  }

  // a replicate must keep enough distinct sizes to pin down the
  // three-parameter law (or every size the data has, when there are fewer)
  std::vector<double> uniq;
  for (const auto& p : pts) uniq.push_back(p.params);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  const std::size_t need = std::min<std::size_t>(3, uniq.size());

  Rng rng(boot_opts.seed);
  std::vector<std::vector<double>> preds(queries.size());
  int skipped = 0;
  for (int rep = 0; rep < boot_opts.replicates; ++rep) {
    std::vector<LrPoint> sample;
    bool usable = false;
    for (int attempt = 0; attempt < 10 && !usable; ++attempt) {
      sample.clear();
      std::vector<double> seen;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        const int id = ids[rng.index(ids.size())];
        for (std::size_t row : groups[id]) {
          sample.push_back(pts[row]);
          seen.push_back(pts[row].params);
        }
      }
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
      usable = seen.size() >= need;
    }
    if (!usable) {
      ++skipped;
      continue;
    }
    const LrFit fit = fit_saturated_lr(sample, fit_opts);
    for (std::size_t q = 0; q < queries.size(); ++q)
      preds[q].push_back(eval_saturated_lr(fit, queries[q]));
  }

  BootstrapResult out;
  out.skipped = skipped;
  out.bands.resize(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto& col = preds[q];
    if (col.empty()) throw RankDeficientError("bootstrap_lr_fit: every replicate was degenerate");
    std::sort(col.begin(), col.end());
    auto percentile = [&](double frac) {
      const double pos = frac * static_cast<double>(col.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, col.size() - 1);
      const double t = pos - static_cast<double>(lo);
      return col[lo] + t * (col[hi] - col[lo]);
    };
    out.bands[q].lo = percentile(0.025);
    out.bands[q].hi = percentile(0.975);
    out.bands[q].point = eval_saturated_lr(full, queries[q]);
  }
  return out;
}

LossFit fit_loss_power_law(const std::vector<LossPoint>& pts, const LossFitOptions& opts) {
  if (pts.size() < 2) throw std::invalid_argument("fit_loss_power_law: need at least two points");
  for (const auto& p : pts) {
    if (!(p.compute > 0.0) || !std::isfinite(p.compute))
      throw std::invalid_argument("fit_loss_power_law: compute must be positive");
    if (!std::isfinite(p.loss)) throw std::invalid_argument("fit_loss_power_law: loss must be finite");
  }

  std::vector<std::string> labels;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& p : pts) {
    if (index.emplace(p.curve, labels.size()).second) labels.push_back(p.curve);
  }
  const std::size_t k = labels.size();
  const std::size_t n = pts.size();

  auto safe_log = [](double v) { return std::log(std::max(v, 1e-300)); };

  // pack free parameters: offsets first, then (lb, lc, le, lf) per curve
  std::vector<double> x;
  auto add_slot = [&](double init) {
    x.push_back(init);
    return static_cast<int>(x.size() - 1);
  };

  std::vector<int> a_slot(k, -1);
  double a_frozen = safe_log(opts.init_a);
  if (opts.fixed_offset.has_value()) {
    a_frozen = safe_log(*opts.fixed_offset);
  } else if (opts.shared_offset) {
    const int s = add_slot(safe_log(opts.init_a));
    for (std::size_t j = 0; j < k; ++j) a_slot[j] = s;
  } else {
    for (std::size_t j = 0; j < k; ++j) a_slot[j] = add_slot(safe_log(opts.init_a));
  }

  std::vector<int> b_slot(k, -1), c_slot(k, -1), e_slot(k, -1), f_slot(k, -1);
  const double lc_frozen = safe_log(opts.init_c);
  const double lf_frozen = safe_log(opts.init_f);
  for (std::size_t j = 0; j < k; ++j) {
    b_slot[j] = add_slot(safe_log(opts.init_b));
    if (!opts.freeze_c) c_slot[j] = add_slot(lc_frozen);
    if (!opts.single_term) {
      e_slot[j] = add_slot(safe_log(opts.init_e));
      if (!opts.freeze_f) f_slot[j] = add_slot(lf_frozen);
    }
  }

  std::vector<std::size_t> curve_of(n);
  std::vector<double> logc(n);
  for (std::size_t i = 0; i < n; ++i) {
    curve_of[i] = index[pts[i].curve];
    logc[i] = std::log(pts[i].compute);
  }

  auto eval = [&](const std::vector<double>& v, std::vector<double>& g) {
    g.assign(v.size(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = curve_of[i];
      const double a = std::exp(a_slot[j] >= 0 ? v[a_slot[j]] : a_frozen);
      const double b = std::exp(v[b_slot[j]]);
      const double c = std::exp(c_slot[j] >= 0 ? v[c_slot[j]] : lc_frozen);
      double term2 = 0.0, e = 0.0, f = 0.0;
      if (!opts.single_term) {
        e = std::exp(v[e_slot[j]]);
        f = std::exp(f_slot[j] >= 0 ? v[f_slot[j]] : lf_frozen);
        term2 = e * std::exp(-f * logc[i]);
      }
      const double term1 = b * std::exp(-c * logc[i]);
      const double r = a + term1 + term2 - pts[i].loss;
      const double scale = 2.0 / static_cast<double>(n);
      loss += r * r / static_cast<double>(n);
      if (a_slot[j] >= 0) g[a_slot[j]] += scale * r * a;
      g[b_slot[j]] += scale * r * term1;
      if (c_slot[j] >= 0) g[c_slot[j]] += scale * r * term1 * (-logc[i]) * c;
      if (!opts.single_term) {
        g[e_slot[j]] += scale * r * term2;
        if (f_slot[j] >= 0) g[f_slot[j]] += scale * r * term2 * (-logc[i]) * f;
      }
    }
    return loss;
  };

  const MinimizeResult res = minimize_adagrad(x, eval, opts.max_iters, opts.step, opts.tol);

  LossFit fit;
  fit.loss = res.loss;
  fit.iters = res.iters;
  fit.curves.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    auto& cf = fit.curves[j];
    cf.curve = labels[j];
    cf.a = std::exp(a_slot[j] >= 0 ? x[a_slot[j]] : a_frozen);
    cf.b = std::exp(x[b_slot[j]]);
    cf.c = std::exp(c_slot[j] >= 0 ? x[c_slot[j]] : lc_frozen);
    if (!opts.single_term) {
      cf.e = std::exp(x[e_slot[j]]);
      cf.f = std::exp(f_slot[j] >= 0 ? x[f_slot[j]] : lf_frozen);
    }
  }
  fit.a = fit.curves.front().a;

  double mean = 0.0;
  for (const auto& p : pts) mean += p.loss;
  mean /= static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cf = fit.curves[curve_of[i]];
    const double pred = cf.a + cf.b * std::pow(pts[i].compute, -cf.c) +
                        cf.e * std::pow(pts[i].compute, -cf.f);
    ss_res += (pred - pts[i].loss) * (pred - pts[i].loss);
    ss_tot += (pts[i].loss - mean) * (pts[i].loss - mean);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double eval_loss_power_law(const LossFit& fit, const std::string& curve, double compute) {
  if (!(compute > 0.0)) throw std::invalid_argument("eval_loss_power_law: compute must be positive");
  for (const auto& cf : fit.curves) {
    if (cf.curve == curve)
      return cf.a + cf.b * std::pow(compute, -cf.c) + cf.e * std::pow(compute, -cf.f);
  }
  throw std::invalid_argument("eval_loss_power_law: unknown curve " + curve);
}

std::vector<MultiplierPoint> compute_multiplier(
    const std::vector<std::pair<double, double>>& baseline,
    const std::vector<std::pair<double, double>>& target, bool log_axis) {
  if (baseline.size() < 2)
    throw std::invalid_argument("compute_multiplier: baseline needs at least two points");
  if (target.empty()) throw std::invalid_argument("compute_multiplier: no target points");

  std::vector<std::pair<double, double>> base = baseline;
  std::sort(base.begin(), base.end());
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!(base[i].first > 0.0))
      throw std::invalid_argument("compute_multiplier: compute must be positive");
    if (i > 0 && !(base[i].second < base[i - 1].second)) {
      std::ostringstream msg;
      msg << "compute_multiplier: baseline loss does not strictly decrease between C="
          << base[i - 1].first << " (L=" << base[i - 1].second << ") and C=" << base[i].first
          << " (L=" << base[i].second << ")";
      throw AmbiguousInversionError(msg.str());
    }
  }

  std::vector<double> xs(base.size());
  for (std::size_t i = 0; i < base.size(); ++i)
    xs[i] = log_axis ? std::log10(base[i].first) : base[i].first;

  std::vector<MultiplierPoint> out;
  out.reserve(target.size());
  for (const auto& [tc, tl] : target) {
    if (!(tc > 0.0))
      throw std::invalid_argument("compute_multiplier: target compute must be positive");
    MultiplierPoint mp;
    mp.compute = tc;
    mp.loss = tl;

    double matched = 0.0;
    bool exact = false;
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (tl == base[i].second) {
        matched = base[i].first;  // reuse the stored compute so hits stay exact
        exact = true;
        break;
      }
    }
    if (!exact) {
      // losses decrease along the polyline; pick the bracketing segment and
      // let the edge segments carry extrapolation
      std::size_t seg = base.size() - 2;
      for (std::size_t i = 0; i + 1 < base.size(); ++i) {
        if (tl > base[i + 1].second) {
          seg = i;
          break;
        }
      }
      const double frac =
          (base[seg].second - tl) / (base[seg].second - base[seg + 1].second);
      const double xm = xs[seg] + frac * (xs[seg + 1] - xs[seg]);
      matched = log_axis ? std::pow(10.0, xm) : xm;
    }

    mp.matched_compute = matched;
    mp.multiplier = matched / tc;
    mp.efficiency = mp.multiplier - 1.0;
    out.push_back(mp);
  }
  return out;
}

CurvatureFit fit_lr_curvature(const std::vector<CurvaturePoint>& pts) {
  if (pts.size() < 3) throw std::invalid_argument("fit_lr_curvature: need at least three points");
  std::vector<double> xs;
  for (const auto& p : pts) {
    if (!(p.lr > 0.0) || !std::isfinite(p.lr))
      throw std::invalid_argument("fit_lr_curvature: lr must be positive");
    if (!std::isfinite(p.loss)) throw std::invalid_argument("fit_lr_curvature: loss must be finite");
    xs.push_back(std::log(p.lr));
  }
  std::vector<double> uniq = xs;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < 3)
    throw std::invalid_argument("fit_lr_curvature: need three distinct learning rates");

  // least-squares parabola in log lr via the 3x3 normal equations
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::Vector3d row(1.0, xs[i], xs[i] * xs[i]);
    m += row * row.transpose();
    rhs += row * pts[i].loss;
  }
  const Eigen::Vector3d coef = m.ldlt().solve(rhs);

  CurvatureFit fit;
  fit.zeta = coef[2];
  if (!(coef[2] > 0.0)) {
    // no interior valley; report the best probed point and flag it
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (pts[i].loss < pts[best].loss) best = i;
    fit.center_lr = pts[best].lr;
    fit.center_loss = pts[best].loss;
    fit.boundary = true;
    return fit;
  }
  const double xc = -coef[1] / (2.0 * coef[2]);
  fit.center_lr = std::exp(xc);
  fit.center_loss = coef[0] - coef[1] * coef[1] / (4.0 * coef[2]);
  fit.boundary = xc < uniq.front() || xc > uniq.back();
  return fit;
}

double curvature_penalty(const CurvatureFit& fit, double lr_ratio) {
  if (!(lr_ratio > 0.0)) throw std::invalid_argument("curvature_penalty: ratio must be positive");
  const double off = std::log(lr_ratio);
  return fit.zeta * off * off;
}

double fit_spectrum_exponent(const std::vector<double>& eigenvalues, int first, int last) {
  const int n = static_cast<int>(eigenvalues.size());
  if (n == 0) throw std::invalid_argument("fit_spectrum_exponent: empty spectrum");
  if (last == 0) last = n;
  if (first < 1 || last > n || first >= last)
    throw std::invalid_argument("fit_spectrum_exponent: bad index range");
  double mx = 0.0, my = 0.0;
  const int count = last - first + 1;
  for (int j = first; j <= last; ++j) {
    const double lam = eigenvalues[static_cast<std::size_t>(j - 1)];
    if (!(lam > 0.0) || !std::isfinite(lam))
      throw std::invalid_argument("fit_spectrum_exponent: eigenvalues must be positive");
    mx += std::log(static_cast<double>(j));
    my += std::log(lam);
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0;
  for (int j = first; j <= last; ++j) {
    const double lx = std::log(static_cast<double>(j)) - mx;
    sxx += lx * lx;
    sxy += lx * (std::log(eigenvalues[static_cast<std::size_t>(j - 1)]) - my);
  }
  return -sxy / sxx;
}

}  // namespace optlab
