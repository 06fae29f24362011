#include "mtrl/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "mtrl/error.hpp"
#include "mtrl/rng.hpp"

namespace mtrl {

namespace {

Eigen::BDCSVD<Matrix> thin_svd(const Matrix& m) {
  return Eigen::BDCSVD<Matrix>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

void require_finite(const Matrix& m, const char* who) {
  require(all_finite(m), ErrorCode::InvalidMatrix, std::string(who) + ": non-finite entry");
}

void require_symmetric(const Matrix& m, const char* who) {
  require(m.rows() == m.cols(), ErrorCode::InvalidMatrix, std::string(who) + ": matrix not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-10 * scale, ErrorCode::InvalidMatrix,
          std::string(who) + ": matrix not symmetric");
}

}  // namespace

bool all_finite(const Matrix& m) noexcept { return m.size() == 0 || m.allFinite(); }

Matrix pinv(const Matrix& m, double tol) {
  require_finite(m, "pinv");
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  const auto svd = thin_svd(m);
  const Vector& s = svd.singularValues();
  const double cutoff = tol * (s.size() > 0 ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix sqrt_psd(const Matrix& m, double tol) {
  require_finite(m, "sqrt_psd");
  require_symmetric(m, "sqrt_psd");
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  Vector lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    require(lambda(i) >= -tol * scale, ErrorCode::NotPSD,
            "sqrt_psd: eigenvalue " + std::to_string(lambda(i)) + " below tolerance");
    lambda(i) = std::sqrt(std::max(lambda(i), 0.0));
  }
  const Matrix& v = eig.eigenvectors();
  return symmetrize(v * lambda.asDiagonal() * v.transpose());
}

Matrix pinv_sqrt_psd(const Matrix& m, double tol) {
  require_finite(m, "pinv_sqrt_psd");
  require_symmetric(m, "pinv_sqrt_psd");
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  Vector lambda = eig.eigenvalues();
  const double top = lambda.cwiseAbs().maxCoeff();
  require(lambda.minCoeff() >= -tol * std::max(1.0, top), ErrorCode::NotPSD,
          "pinv_sqrt_psd: matrix has a negative eigenvalue");
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    lambda(i) = lambda(i) > kRankTol * top && lambda(i) > 0.0 ? 1.0 / std::sqrt(lambda(i)) : 0.0;
  }
  const Matrix& v = eig.eigenvectors();
  return symmetrize(v * lambda.asDiagonal() * v.transpose());
}

Matrix range_projector_psd(const Matrix& m, double tol) {
  require_finite(m, "range_projector_psd");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  const Vector& lambda = eig.eigenvalues();
  const double top = lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0;
  Matrix basis(m.rows(), 0);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > tol * top && lambda(i) > 0.0) {
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = eig.eigenvectors().col(i);
    }
  }
  return basis * basis.transpose();
}

double spectral_norm(const Matrix& m) {
  require_finite(m, "spectral_norm");
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  return thin_svd(m).singularValues()(0);
}

double log_det_spd(const Matrix& m) {
  require_finite(m, "log_det_spd");
  Eigen::LLT<Matrix> llt(symmetrize(m));
  require(llt.info() == Eigen::Success, ErrorCode::NotPSD, "log_det_spd: matrix not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

double spectral_radius(const Matrix& m) {
  require_finite(m, "spectral_radius");
  require(m.rows() == m.cols(), ErrorCode::InvalidMatrix, "spectral_radius: matrix not square");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> eig(m, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::Index numerical_rank(const Matrix& m, double tol) {
  require_finite(m, "numerical_rank");
  if (m.size() == 0) return 0;
  const Vector s = thin_svd(m).singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0) && s(i) > 0.0) ++rank;
  }
  return rank;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix row_space_basis(const Matrix& m, double tol) {
  const auto svd = thin_svd(m);
  const Eigen::Index rank = numerical_rank(m, tol);
  return svd.matrixV().leftCols(rank).transpose();
}

double max_principal_angle_sin(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorCode::InvalidArgument,
          "max_principal_angle_sin: column counts differ");
  const Matrix qa = row_space_basis(a);
  const Matrix qb = row_space_basis(b);
  const Matrix residual = qa - (qa * qb.transpose()) * qb;
  return std::min(1.0, spectral_norm(residual));
}

Matrix Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  Matrix out(rows, cols);
  // Row-major fill so that a sample's coordinates are drawn consecutively.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal();
  return out;
}

Vector Rng::normal_vector(Eigen::Index n) {
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = normal();
  return out;
}

Matrix Rng::orthonormal_rows(Eigen::Index r, Eigen::Index d) {
  require(r <= d, ErrorCode::InvalidArgument, "orthonormal_rows: r > d");
  const Matrix g = normal_matrix(d, r);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, r);
  // Fix column signs so the draw is Haar distributed.
  const Matrix rr = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < r; ++j) {
    if (rr(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q.transpose();
}

Eigen::Index Rng::categorical(const Eigen::Ref<const Vector>& weights) {
  const double total = weights.sum();
  double u = uniform() * total;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    u -= weights(i);
    if (u < 0.0) return i;
  }
  // Floating-point slack: fall back to the last state with positive weight.
  for (Eigen::Index i = weights.size() - 1; i >= 0; --i) {
    if (weights(i) > 0.0) return i;
  }
  return weights.size() - 1;
}

}  // namespace mtrl
