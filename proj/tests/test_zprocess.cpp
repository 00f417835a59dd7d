#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <optlab/errors.hpp>
#include <optlab/schedules.hpp>
#include <optlab/zprocess.hpp>

using namespace optlab;

TEST_CASE("every-step arrivals collapse each window to a unit sample") {
  // with p = 1 and unit gradients the moments sit at m = v = 1 from the
  // first step on, so every window holds exactly one ratio of 1/(1 + eps)
  ZProcessConfig cfg;
  cfg.p = 1.0;
  cfg.windows = 3;
  cfg.trials = 50;
  cfg.seed = 2;
  const ZProcessResult res = simulate_z(cfg);
  REQUIRE(res.windows.size() == 3);
  for (const auto& w : res.windows) {
    CHECK(w.mean_abs == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(w.max_abs == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(w.se == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(w.censored_frac == 0.0);
    CHECK(w.mean_gap == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("window gaps average the reciprocal arrival rate") {
  ZProcessConfig cfg;
  cfg.beta1 = constant_schedule(0.9);
  cfg.beta2 = constant_schedule(0.999);
  cfg.p = 0.1;
  cfg.windows = 2;
  cfg.trials = 4000;
  cfg.seed = 5;
  const ZProcessResult res = simulate_z(cfg);
  // geometric gaps: sd/sqrt(n) is about 0.15 steps here
  CHECK(std::abs(res.windows[0].mean_gap - 10.0) < 0.5);
  CHECK(std::abs(res.windows[1].mean_gap - 10.0) < 0.5);
}

TEST_CASE("constant-rate windows respect the closed-form sup bound") {
  ZProcessConfig cfg;
  cfg.beta1 = constant_schedule(0.9);
  cfg.beta2 = constant_schedule(0.999);
  cfg.p = 0.1;
  cfg.windows = 2;
  cfg.trials = 2000;
  cfg.seed = 11;
  const ZProcessResult res = simulate_z(cfg);
  const double bound = bound_constant_rates(0.9, 0.999);
  for (const auto& w : res.windows) {
    CHECK(w.max_abs <= bound);
    CHECK(w.censored_frac == 0.0);
  }
}

TEST_CASE("simulate_z is reproducible for a fixed seed") {
  ZProcessConfig cfg;
  cfg.p = 0.05;
  cfg.windows = 2;
  cfg.trials = 300;
  cfg.law = GradientLaw::Normal;
  cfg.seed = 17;
  const ZProcessResult a = simulate_z(cfg);
  const ZProcessResult b = simulate_z(cfg);
  REQUIRE(a.windows.size() == b.windows.size());
  for (std::size_t i = 0; i < a.windows.size(); ++i) {
    CHECK(a.windows[i].mean_abs == b.windows[i].mean_abs);
    CHECK(a.windows[i].max_abs == b.windows[i].max_abs);
    CHECK(a.windows[i].mean_gap == b.windows[i].mean_gap);
  }
}

TEST_CASE("censoring clamps runaway windows and flags them") {
  ZProcessConfig cfg;
  cfg.beta1 = constant_schedule(0.9);
  cfg.beta2 = constant_schedule(0.999);
  cfg.p = 0.2;
  cfg.windows = 1;
  cfg.trials = 500;
  cfg.censor = 1e-3;  // far below typical |Z|, so nearly everything trips it
  cfg.seed = 23;
  const ZProcessResult res = simulate_z(cfg);
  CHECK(res.windows[0].censored_frac > 0.5);
  CHECK(res.windows[0].max_abs == 1e-3);
  CHECK(res.windows[0].mean_abs <= 1e-3);
}

TEST_CASE("simulate_z validates its configuration") {
  ZProcessConfig cfg;
  cfg.p = 0.0;
  CHECK_THROWS_AS(simulate_z(cfg), std::invalid_argument);
  cfg.p = 1.5;
  CHECK_THROWS_AS(simulate_z(cfg), std::invalid_argument);
  cfg.p = 0.1;
  cfg.windows = 0;
  CHECK_THROWS_AS(simulate_z(cfg), std::invalid_argument);
  cfg.windows = 1;
  cfg.trials = 0;
  CHECK_THROWS_AS(simulate_z(cfg), std::invalid_argument);
  cfg.trials = 10;
  cfg.eps = 0.0;
  CHECK_THROWS_AS(simulate_z(cfg), std::invalid_argument);
  cfg.eps = 1e-8;
  cfg.censor = 0.0;
  CHECK_THROWS_AS(simulate_z(cfg), std::invalid_argument);
}

TEST_CASE("constant-rate bound matches the pinned value and simple limits") {
  CHECK(bound_constant_rates(0.9, 0.999) == doctest::Approx(319.093).epsilon(1e-4));
  // memoryless first moment: the bound reduces to 1/sqrt(1 - beta2)
  CHECK(bound_constant_rates(0.0, 0.99) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_THROWS_AS(bound_constant_rates(0.9, 0.8), StabilityConditionError);
  CHECK_THROWS_AS(bound_constant_rates(1.0, 0.999), StabilityConditionError);
  CHECK_THROWS_AS(bound_constant_rates(0.5, 1.0), StabilityConditionError);
  CHECK_THROWS_AS(bound_constant_rates(-0.1, 0.9), StabilityConditionError);
}

namespace {

std::vector<ZGridPoint> power_grid(double slope, double censored = 0.0) {
  std::vector<ZGridPoint> grid;
  for (double p : {1e-1, 1e-2, 1e-3, 1e-4})
    grid.push_back({p, 2.0 * std::pow(1.0 / p, slope), censored});
  return grid;
}

}  // namespace

TEST_CASE("stability classifier reads growth exponents off the grid") {
  CHECK(classify_stability(power_grid(0.0), 10000).verdict == StabilityVerdict::Bounded);
  CHECK(classify_stability(power_grid(0.05), 10000).verdict == StabilityVerdict::Bounded);
  const StabilityReport half = classify_stability(power_grid(0.5), 10000);
  CHECK(half.verdict == StabilityVerdict::SqrtP);
  CHECK(half.slope == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(classify_stability(power_grid(1.0), 10000).verdict == StabilityVerdict::Divergent);
  // growth between the recognized bands is reported as divergent, not guessed
  CHECK(classify_stability(power_grid(0.25), 10000).verdict == StabilityVerdict::Divergent);
  CHECK(classify_stability(power_grid(0.8), 10000).verdict == StabilityVerdict::Divergent);
}

TEST_CASE("stability classifier treats censoring as divergence evidence") {
  CHECK(classify_stability(power_grid(0.0, 0.05), 10000).verdict == StabilityVerdict::Divergent);
  // trace censoring below one percent does not flip the verdict
  CHECK(classify_stability(power_grid(0.0, 0.005), 10000).verdict == StabilityVerdict::Bounded);
}

TEST_CASE("stability classifier enforces its preconditions") {
  // three points squeezed into one decade are not enough leverage
  std::vector<ZGridPoint> narrow = {{1e-1, 2.0, 0.0}, {5e-2, 2.0, 0.0}, {1e-2, 2.0, 0.0}};
  CHECK_THROWS_AS(classify_stability(narrow, 10000), std::invalid_argument);
  CHECK_THROWS_AS(classify_stability(power_grid(0.5), 999), std::invalid_argument);
  std::vector<ZGridPoint> pair = {{1e-1, 2.0, 0.0}, {1e-3, 2.0, 0.0}};
  CHECK_THROWS_AS(classify_stability(pair, 10000), std::invalid_argument);
  // the canonical three-decade grid is accepted
  std::vector<ZGridPoint> canon = {{1e-1, 2.0, 0.0}, {1e-2, 2.0, 0.0}, {1e-3, 2.0, 0.0}};
  CHECK_NOTHROW(classify_stability(canon, 10000));
  std::vector<ZGridPoint> zero = power_grid(0.5);
  zero[1].mean_abs = 0.0;
  CHECK_THROWS_AS(classify_stability(zero, 10000), std::invalid_argument);
  std::vector<ZGridPoint> badp = power_grid(0.5);
  badp[0].p = 0.0;
  CHECK_THROWS_AS(classify_stability(badp, 10000), std::invalid_argument);
}
