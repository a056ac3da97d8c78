#pragma once

#include <vector>

namespace metsfuse::num {

/// Solves A x = b for a symmetric positive-definite n x n matrix (row-major) by Cholesky
/// factorization. Throws NumericError when A is not positive definite.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b);

}  // namespace metsfuse::num
