#pragma once

#include <Eigen/Core>

namespace optlab {

// Odd quintic iteration that pushes all singular values of the (Frobenius-
// normalized) input toward 1, approximating the orthogonal polar factor.
// Tall inputs are transposed internally so the Gram products stay small.
// Throws DegenerateInputError on an identically-zero matrix.
Eigen::MatrixXd newton_schulz(const Eigen::MatrixXd& m, int iters = 5, double eps = 1e-8);

}  // namespace optlab
