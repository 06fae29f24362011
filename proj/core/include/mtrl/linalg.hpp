#pragma once

#include <Eigen/Dense>

namespace mtrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative singular-value cutoff shared by every pseudo-inverse in the library.
inline constexpr double kRankTol = 1e-10;

bool all_finite(const Matrix& m) noexcept;

/// Moore-Penrose pseudo-inverse. Singular values below tol * sigma_max are
/// treated as zero. Throws InvalidMatrix on non-finite input.
Matrix pinv(const Matrix& m, double tol = kRankTol);

/// Symmetric PSD square root. Eigenvalues in [-tol * max(1, |lambda|_max), 0)
/// are clipped to zero; anything more negative throws NotPSD. Asymmetric
/// input (beyond 1e-10 relative) throws InvalidMatrix.
Matrix sqrt_psd(const Matrix& m, double tol = 1e-10);

/// (M^+)^{1/2} for symmetric PSD M, using the kRankTol relative cutoff.
Matrix pinv_sqrt_psd(const Matrix& m, double tol = 1e-10);

/// Orthogonal projector onto range(M) for symmetric PSD M.
Matrix range_projector_psd(const Matrix& m, double tol = kRankTol);

double spectral_norm(const Matrix& m);

/// log det of a symmetric positive-definite matrix (Cholesky based).
double log_det_spd(const Matrix& m);

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Matrix& m);

/// Numerical rank with the kRankTol relative cutoff.
Eigen::Index numerical_rank(const Matrix& m, double tol = kRankTol);

Matrix symmetrize(const Matrix& m);

/// Sine of the largest principal angle between the row spaces of a and b.
/// Both inputs must have the same column count.
double max_principal_angle_sin(const Matrix& a, const Matrix& b);

/// Orthonormal basis (as rows) of the row space of m.
Matrix row_space_basis(const Matrix& m, double tol = kRankTol);

}  // namespace mtrl
