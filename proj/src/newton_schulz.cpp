#include <optlab/newton_schulz.hpp>

#include <optlab/errors.hpp>

namespace optlab {

namespace {
// quintic coefficients tuned for a steep slope at zero rather than exact
// convergence; singular values oscillate in a band around one
constexpr double kA = 3.4445;
constexpr double kB = -4.7750;
constexpr double kC = 2.0315;
}  // namespace

Eigen::MatrixXd newton_schulz(const Eigen::MatrixXd& m, int iters, double eps) {
  if ((m.array() == 0.0).all()) {
    throw DegenerateInputError("orthogonalize: input matrix is identically zero");
  }
  const bool tall = m.rows() > m.cols();
  Eigen::MatrixXd x = tall ? m.transpose() : m;
  x /= x.norm() + eps;
  Eigen::MatrixXd gram, poly;
  for (int k = 0; k < iters; ++k) {
    gram.noalias() = x * x.transpose();
    poly.noalias() = kB * gram + kC * gram * gram;
    x = kA * x + poly * x;
  }
  if (tall) return x.transpose();
  return x;
}

}  // namespace optlab
