#pragma once

#include <cstddef>
#include <vector>

namespace optlab {

// pairwise reduction in a fixed order: deterministic across runs and far more
// accurate than left-to-right accumulation on long windows
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

}  // namespace optlab
