#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace optlab {

// Deterministic random stream. mt19937_64 is fully specified by the C++
// standard, and the normal sampler is Marsaglia's polar method rather than
// std::normal_distribution (whose algorithm is implementation-defined), so a
// seed reproduces the same draws on every platform this builds on.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform on (0,1): top 53 bits, rejects exact zero
  double uniform() {
    for (;;) {
      const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  // standard normal via polar rejection, caching the spare deviate
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    for (;;) {
      const double a = 2.0 * uniform() - 1.0;
      const double b = 2.0 * uniform() - 1.0;
      const double s = a * a + b * b;
      if (s >= 1.0 || s == 0.0) continue;
      const double f = std::sqrt(-2.0 * std::log(s) / s);
      spare_ = b * f;
      has_spare_ = true;
      return a * f;
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  // uniform index in [0, n)
  std::size_t index(std::size_t n) {
    const std::size_t i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace optlab
