// Monte-Carlo survey of the moment-ratio process under the three schedule
// pairs the divergence lab cares about. Prints per-window statistics across
// an arrival-probability grid plus the classifier's readout, so stability
// thresholds can be pinned from data rather than guesswork.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <optlab/schedules.hpp>
#include <optlab/zprocess.hpp>

using namespace optlab;

namespace {

struct Pair {
  const char* name;
  ScheduleSpec beta1;
  ScheduleSpec beta2;
};

}  // namespace

int main(int argc, char** argv) {
  long long trials = 10000;
  int windows = 3;
  if (argc > 1) trials = std::atoll(argv[1]);
  if (argc > 2) windows = std::atoi(argv[2]);

  const std::vector<Pair> pairs = {
      {"const(0.9)/const(0.999)", constant_schedule(0.9), constant_schedule(0.999)},
      {"log(d=8)/log(d=8)", log_time_beta(8.0), log_time_beta(8.0)},
      {"log(d=8)/const(0.999)", log_time_beta(8.0), constant_schedule(0.999)},
  };
  const std::vector<double> ps = {1e-1, 1e-2, 1e-3};

  std::printf("closed-form bound const(0.9, 0.999): %.6f\n", bound_constant_rates(0.9, 0.999));
  std::printf("trials per point: %lld, windows: %d\n\n", trials, windows);

  for (const Pair& pair : pairs) {
    std::printf("== %s ==\n", pair.name);
    std::vector<ZGridPoint> grid;
    std::vector<double> window2;
    for (double p : ps) {
      ZProcessConfig cfg;
      cfg.beta1 = pair.beta1;
      cfg.beta2 = pair.beta2;
      cfg.p = p;
      cfg.windows = windows;
      cfg.trials = trials;
      cfg.seed = 101;
      const ZProcessResult res = simulate_z(cfg);
      for (const ZWindowStats& w : res.windows) {
        std::printf("  p=%-7g w%-2d mean|Z|=%-12.5g se=%-10.3g max=%-12.5g cens=%-8.4f gap=%g\n",
                    p, w.window, w.mean_abs, w.se, w.max_abs, w.censored_frac, w.mean_gap);
      }
      const ZWindowStats& w2 = res.windows.at(1);
      grid.push_back({p, w2.mean_abs, w2.censored_frac});
      window2.push_back(w2.mean_abs);
    }
    for (std::size_t i = 1; i < window2.size(); ++i) {
      std::printf("  window-2 decade ratio %g -> %g : %.4f\n", ps[i - 1], ps[i],
                  window2[i] / window2[i - 1]);
    }
    const StabilityReport rep = classify_stability(grid, trials);
    const char* verdict = rep.verdict == StabilityVerdict::Bounded  ? "BOUNDED"
                          : rep.verdict == StabilityVerdict::SqrtP ? "SQRT_P"
                                                                   : "DIVERGENT";
    std::printf("  slope=%.4f curvature=%.4f verdict=%s\n\n", rep.slope, rep.curvature, verdict);
  }
  return 0;
}
