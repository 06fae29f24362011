#pragma once

// Independent reference computations used as test oracles. None of these
// call into the library's own solvers beyond plain Eigen arithmetic.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix gaussian(std::mt19937_64& eng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(eng);
  return m;
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1.0, b.norm());
  return (a - b).norm() / scale;
}

/// Complete orthogonal decomposition least squares: min-norm solution of A x = b.
inline Matrix min_norm_solve(const Matrix& a, const Matrix& b) {
  return a.completeOrthogonalDecomposition().solve(b);
}

/// Eigen-decomposition based symmetric square root (no clipping logic).
inline Matrix sym_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Gaussian upper tail 1 - Phi(x) via erfc.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Brute-force sup_F 4<W, Z F^T> - ||Z F^T||_F^2 by gradient ascent from
/// several random starts with step 1 / L, L the gradient Lipschitz constant.
inline double brute_force_offset_sup(const Matrix& z, const Matrix& w, std::mt19937_64& eng, int starts = 4,
                                     int iters = 20000) {
  const Matrix zz = z.transpose() * z;
  const double lip = 2.0 * Eigen::SelfAdjointEigenSolver<Matrix>(zz).eigenvalues().maxCoeff();
  double best = -INFINITY;
  for (int s = 0; s < starts; ++s) {
    Matrix f = gaussian(eng, w.cols(), z.cols());
    for (int it = 0; it < iters; ++it) {
      const Matrix grad = 4.0 * w.transpose() * z - 2.0 * f * zz;
      f += grad / lip;
      if (grad.norm() < 1e-13 * std::max(1.0, f.norm())) break;
    }
    const Matrix zf = z * f.transpose();
    best = std::max(best, 4.0 * (w.array() * zf.array()).sum() - zf.squaredNorm());
  }
  return best;
}

}  // namespace oracle
