// scratch tool: sweeps peak rates on the synthetic problems so the acceptance
// constants can be chosen from measured tables rather than guesses
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include <optlab/optimizers.hpp>
#include <optlab/plrf.hpp>
#include <optlab/schedules.hpp>

using namespace optlab;

namespace {

double final_risk(const RunRecord& r) { return r.risk.back(); }

const char* tag(const RunRecord& r) {
  return r.status == RunStatus::Diverged ? "DIVERGED" : "ok";
}

PlrfConfig crit1_problem(std::uint64_t seed) {
  PlrfConfig p;
  p.dims = 400;
  p.features = 1200;
  p.rho = 1.25;
  p.eta = 0.75;
  p.seed = seed * 7919 + 13;
  return p;
}

void crit1(long long T, int seeds, std::vector<double> gammas) {
  if (gammas.empty()) gammas = {3e-4, 1e-3, 3e-3, 1e-2, 3e-2};
  const std::vector<double> kappas = {0.2, 0.3, 0.5, 0.7, 0.85, 1.0};
  for (int s = 1; s <= seeds; ++s) {
    TrainOptions topt;
    topt.iterations = T;
    topt.eval_every = std::max<long long>(T / 50, 1);
    topt.seed = static_cast<std::uint64_t>(s);
    const PlrfProblem prob = PlrfProblem::build(crit1_problem(topt.seed));
    for (double g : gammas) {
      const RunRecord adam = run_training(prob, adamw_config(g), topt);
      std::printf("seed=%d adam      gamma=%-8g final=%-12g %s\n", s, g, final_risk(adam),
                  tag(adam));
    }
    for (double k : kappas) {
      for (double g : gammas) {
        const RunRecord r = run_training(prob, adana_config(g, k), topt);
        std::printf("seed=%d adana k=%-4g gamma=%-8g final=%-12g %s\n", s, k, g, final_risk(r),
                    tag(r));
      }
    }
  }
}

MoeConfig crit2_problem(std::uint64_t seed) {
  MoeConfig m;
  m.base.dims = 333;
  m.base.features = 1000;
  m.base.rho = 1.5;
  m.base.eta = 0.75;
  m.base.seed = seed * 7919 + 13;
  m.experts = 1000;
  m.zipf = 1.0;
  return m;
}

void crit2(long long T, int seeds) {
  const std::vector<double> gammas = {1e-3, 3e-3, 1e-2};
  for (int s = 1; s <= seeds; ++s) {
    TrainOptions topt;
    topt.iterations = T;
    topt.batch = 10;
    topt.eval_every = std::max<long long>(T / 30, 1);
    topt.seed = static_cast<std::uint64_t>(s);
    const MoePlrfProblem prob = MoePlrfProblem::build(crit2_problem(topt.seed));
    for (double g : gammas) {
      OptimizerConfig adana_const_b2 = adana_config(g, 0.85);
      adana_const_b2.beta2 = constant_schedule(0.999);

      const RunRecord a = run_training(prob, log_nadamw_config(g), topt);
      std::printf("seed=%d log-nadamw    gamma=%-8g final=%-12g %s\n", s, g, final_risk(a),
                  tag(a));
      const RunRecord b = run_training(prob, adana_const_b2, topt);
      std::printf("seed=%d adana-constb2 gamma=%-8g final=%-12g %s\n", s, g, final_risk(b),
                  tag(b));
      const RunRecord c = run_training(prob, dana_star_mk4_config(g, 0.85), topt);
      std::printf("seed=%d dana-star-mk4 gamma=%-8g final=%-12g %s\n", s, g, final_risk(c),
                  tag(c));
    }
  }
}

void crit5(long long T) {
  const double kappa = 0.85;
  const std::vector<double> gammas = {1e-3, 3e-3, 1e-2};
  PlrfConfig pc;
  pc.dims = 200;
  pc.features = 600;
  pc.rho = 1.25;
  pc.eta = 0.75;
  pc.seed = 99;
  const PlrfProblem prob = PlrfProblem::build(pc);
  TrainOptions topt;
  topt.iterations = T;
  topt.eval_every = std::max<long long>(T / 50, 1);
  topt.seed = 7;
  const double horizon = static_cast<double>(T);
  for (double g : gammas) {
    OptimizerConfig mix = ademamix_config(g, horizon, 1.0 - 8.0 / horizon, 0.999, 0.0,
                                          std::pow(horizon, 1.0 - kappa), horizon);
    OptimizerConfig adana = adana_config(g, kappa);
    adana.damping = damping_constant(kappa, horizon);

    const RunRecord a = run_training(prob, mix, topt);
    const RunRecord b = run_training(prob, adana, topt);
    const double ra = final_risk(a), rb = final_risk(b);
    std::printf("gamma=%-8g ademamix=%-12g (%s) adana-const=%-12g (%s) rel-gap=%g\n", g, ra,
                tag(a), rb, tag(b), std::abs(ra - rb) / std::min(ra, rb));
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: calibrate {crit1|crit2|crit5} [iterations] [seeds]\n");
    return 1;
  }
  const std::string mode = argv[1];
  const long long T = argc > 2 ? std::atoll(argv[2]) : 0;
  const int seeds = argc > 3 ? std::atoi(argv[3]) : 1;
  std::vector<double> gammas;
  for (int i = 4; i < argc; ++i) gammas.push_back(std::atof(argv[i]));
  if (mode == "crit1") {
    crit1(T > 0 ? T : 100000, seeds, gammas);
  } else if (mode == "crit2") {
    crit2(T > 0 ? T : 30000, seeds);
  } else if (mode == "crit5") {
    crit5(T > 0 ? T : 20000);
  } else {
    std::fprintf(stderr, "unknown mode: %s\n", mode.c_str());
    return 1;
  }
  return 0;
}
