#include "mtrl/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mtrl/error.hpp"

namespace mtrl {

void Dims::validate() const {
  require(d_x >= 1 && d_y >= 1 && r >= 1, ErrorCode::InvalidArgument, "Dims: all dimensions must be >= 1");
  require(r <= d_x, ErrorCode::InvalidArgument, "Dims: r must not exceed d_x");
}

const char* to_string(SampleKind kind) noexcept {
  return kind == SampleKind::IidDraw ? "iid" : "trajectory";
}

void TaskDataset::validate() const {
  require(covariates.rows() >= 1, ErrorCode::InvalidArgument, "TaskDataset: need N >= 1");
  require(covariates.rows() == labels.rows(), ErrorCode::InvalidArgument,
          "TaskDataset: covariate/label row counts differ");
  require(all_finite(covariates) && all_finite(labels), ErrorCode::InvalidMatrix,
          "TaskDataset: non-finite entry");
}

LinearHead::LinearHead(Matrix f, double bound) : F(std::move(f)), frobenius_bound(bound) {
  require(bound >= 0.0, ErrorCode::InvalidArgument, "LinearHead: negative Frobenius bound");
  require(all_finite(F), ErrorCode::InvalidMatrix, "LinearHead: non-finite entry");
  require(bound == 0.0 || F.norm() <= bound * (1.0 + 1e-12), ErrorCode::InvalidArgument,
          "LinearHead: ||F||_F exceeds its bound");
}

Representation Representation::linear(Matrix g, double sup_bound) {
  require(g.rows() >= 1 && g.cols() >= g.rows(), ErrorCode::InvalidArgument,
          "Representation::linear: G must be r x d_x with r <= d_x");
  require(all_finite(g), ErrorCode::InvalidMatrix, "Representation::linear: non-finite entry");
  require(numerical_rank(g) == g.rows(), ErrorCode::InvalidMatrix,
          "Representation::linear: G is rank deficient");
  return Representation(LinearMap{std::move(g)}, sup_bound);
}

Representation Representation::tanh_features(Matrix w) {
  require(w.rows() >= 1 && w.cols() >= 1, ErrorCode::InvalidArgument,
          "Representation::tanh_features: empty weight matrix");
  require(all_finite(w), ErrorCode::InvalidMatrix, "Representation::tanh_features: non-finite entry");
  const double bound = std::sqrt(static_cast<double>(w.rows()));
  return Representation(TanhFeatures{std::move(w)}, bound);
}

Representation Representation::finite_member(std::string dictionary_id, std::size_t index,
                                             Representation member) {
  const double bound = member.sup_bound();
  auto target = std::make_shared<const Representation>(std::move(member));
  return Representation(Member{std::move(dictionary_id), index, std::move(target)}, bound);
}

Representation::Kind Representation::kind() const noexcept {
  switch (storage_.index()) {
    case 0: return Kind::Linear;
    case 1: return Kind::FiniteMember;
    default: return Kind::Parametric;
  }
}

const Representation& Representation::resolved() const noexcept {
  const Representation* rep = this;
  while (const auto* m = std::get_if<Member>(&rep->storage_)) rep = m->target.get();
  return *rep;
}

const Matrix* Representation::linear_map() const noexcept {
  const auto* lin = std::get_if<LinearMap>(&resolved().storage_);
  return lin ? &lin->G : nullptr;
}

const Matrix* Representation::tanh_weights() const noexcept {
  const auto* t = std::get_if<TanhFeatures>(&resolved().storage_);
  return t ? &t->W : nullptr;
}

const Representation::Member* Representation::member() const noexcept {
  return std::get_if<Member>(&storage_);
}

int Representation::input_dim() const noexcept {
  const Representation& r = resolved();
  if (const auto* lin = std::get_if<LinearMap>(&r.storage_)) return static_cast<int>(lin->G.cols());
  return static_cast<int>(std::get<TanhFeatures>(r.storage_).W.cols());
}

int Representation::output_dim() const noexcept {
  const Representation& r = resolved();
  if (const auto* lin = std::get_if<LinearMap>(&r.storage_)) return static_cast<int>(lin->G.rows());
  return static_cast<int>(std::get<TanhFeatures>(r.storage_).W.rows());
}

Matrix Representation::apply(const Matrix& x) const {
  require(x.cols() == input_dim(), ErrorCode::InvalidArgument,
          "Representation::apply: covariate dimension mismatch");
  if (const Matrix* g = linear_map()) return x * g->transpose();
  const Matrix& w = *tanh_weights();
  return (x * w.transpose()).array().tanh().matrix();
}

MarkovChainLaw MarkovChainLaw::with_centred_basis(const Matrix& p, int d_x) {
  validate_row_stochastic(p);
  require(d_x >= 1, ErrorCode::InvalidArgument, "MarkovChainLaw: d_x must be >= 1");
  MarkovChainLaw law;
  law.P = p;
  law.stationary = stationary_distribution(p);
  const Eigen::Index s = p.rows();
  Matrix basis = Matrix::Zero(s, d_x);
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(s, d_x); ++i) basis(i, i) = 1.0;
  const Eigen::RowVectorXd mean = law.stationary.transpose() * basis;
  law.embedding = basis.rowwise() - mean;
  return law;
}

int covariate_dim(const CovariateLaw& law) {
  return std::visit(
      [](const auto& l) -> int {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, GaussianLaw>) return static_cast<int>(l.sigma.rows());
        else if constexpr (std::is_same_v<T, LdsLaw>) return static_cast<int>(l.A.rows());
        else return static_cast<int>(l.embedding.cols());
      },
      law);
}

bool is_trajectory_law(const CovariateLaw& law) noexcept {
  return !std::holds_alternative<GaussianLaw>(law);
}

std::string law_name(const CovariateLaw& law) {
  switch (law.index()) {
    case 0: return "gaussian";
    case 1: return "lds";
    default: return "markov_chain";
  }
}

void validate_law(const CovariateLaw& law) {
  if (const auto* g = std::get_if<GaussianLaw>(&law)) {
    require(g->sigma.rows() == g->sigma.cols() && g->sigma.rows() >= 1, ErrorCode::InvalidArgument,
            "GaussianLaw: covariance must be square");
    require(all_finite(g->sigma), ErrorCode::InvalidMatrix, "GaussianLaw: non-finite covariance");
    const double scale = std::max(1.0, g->sigma.cwiseAbs().maxCoeff());
    require((g->sigma - g->sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
            ErrorCode::InvalidMatrix, "GaussianLaw: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(g->sigma), Eigen::EigenvaluesOnly);
    require(eig.eigenvalues().minCoeff() >= -1e-10 * scale, ErrorCode::NotPSD,
            "GaussianLaw: covariance not PSD");
  } else if (const auto* lds = std::get_if<LdsLaw>(&law)) {
    require(lds->A.rows() == lds->A.cols() && lds->A.rows() >= 1, ErrorCode::InvalidArgument,
            "LdsLaw: A must be square");
    require(spectral_radius(lds->A) < 1.0, ErrorCode::UnstableSystem,
            "LdsLaw: spectral radius must be < 1");
  } else {
    const auto& mc = std::get<MarkovChainLaw>(law);
    validate_row_stochastic(mc.P);
    require(mc.embedding.rows() == mc.P.rows(), ErrorCode::InvalidArgument,
            "MarkovChainLaw: embedding needs one row per state");
    require(mc.stationary.size() == mc.P.rows(), ErrorCode::InvalidArgument,
            "MarkovChainLaw: stationary law has wrong size");
  }
}

void PopulationSpec::validate() const {
  dims.validate();
  require(tasks.size() >= 2, ErrorCode::InvalidArgument, "PopulationSpec: need a target and >= 1 source");
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), ErrorCode::InvalidArgument,
          "PopulationSpec: noise sigma must be finite and >= 0");
  require(rep_star.input_dim() == dims.d_x && rep_star.output_dim() == dims.r,
          ErrorCode::InvalidArgument, "PopulationSpec: rep_star does not conform to dims");
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    validate_law(tasks[t].law);
    require(covariate_dim(tasks[t].law) == dims.d_x, ErrorCode::InvalidArgument,
            "PopulationSpec: task " + std::to_string(t) + " covariate dimension mismatch");
    require(tasks[t].head.d_y() == dims.d_y && tasks[t].head.r() == dims.r,
            ErrorCode::InvalidArgument, "PopulationSpec: task " + std::to_string(t) + " head shape mismatch");
  }
}

void validate_row_stochastic(const Matrix& p) {
  require(p.rows() == p.cols() && p.rows() >= 1, ErrorCode::InvalidMatrix,
          "transition matrix must be square and non-empty");
  require(all_finite(p), ErrorCode::InvalidMatrix, "transition matrix has non-finite entries");
  require(p.minCoeff() >= 0.0, ErrorCode::InvalidMatrix, "transition matrix has negative entries");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    require(std::abs(p.row(i).sum() - 1.0) <= 1e-12, ErrorCode::InvalidMatrix,
            "transition matrix row " + std::to_string(i) + " does not sum to 1");
  }
}

Vector stationary_distribution(const Matrix& p) {
  validate_row_stochastic(p);
  const Eigen::Index s = p.rows();
  const Matrix m = p.transpose() - Matrix::Identity(s, s);
  const Vector sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
  Eigen::Index null_dim = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) <= 1e-9) ++null_dim;
  }
  require(null_dim == 1, ErrorCode::NotErgodic, "chain has no unique stationary distribution");
  Matrix aug(s + 1, s);
  aug << m, Eigen::RowVectorXd::Ones(s);
  Vector rhs = Vector::Zero(s + 1);
  rhs(s) = 1.0;
  Vector pi = aug.colPivHouseholderQr().solve(rhs);
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

}  // namespace mtrl
