#include "mtrl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtrl/datagen.hpp"
#include "mtrl/erm.hpp"
#include "mtrl/error.hpp"
#include "mtrl/rng.hpp"

namespace mtrl::diagnostics {

namespace {

bool use_analytic(const Representation& g, const Representation& g_star, const MonteCarloOptions& mc) {
  return !mc.force && g.is_linear() && g_star.is_linear();
}

Matrix stacked_features(const Matrix& x, const Representation& g, const Representation& g_star) {
  Matrix z(x.rows(), g.output_dim() + g_star.output_dim());
  z << g.apply(x), g_star.apply(x);
  return z;
}

Matrix schur_of(const Matrix& sigma, Eigen::Index rg) {
  const Eigen::Index rs = sigma.rows() - rg;
  const Matrix s11 = sigma.topLeftCorner(rg, rg);
  const Matrix s12 = sigma.topRightCorner(rg, rs);
  const Matrix s22 = sigma.bottomRightCorner(rs, rs);
  return symmetrize(s22 - s12.transpose() * pinv(s11) * s12);
}

void check_task(const PopulationSpec& spec, std::size_t task) {
  require(task < spec.tasks.size(), ErrorCode::InvalidArgument, "task index out of range");
}

// Treats a PSD matrix as zero when its norm is round-off relative to `scale`.
bool negligible(const Matrix& m, double scale) {
  return m.size() == 0 || m.norm() <= 1e-12 * std::max(1.0, scale);
}

double risk_from_moment(const Matrix& sigma, const Matrix& f, const Matrix& f_star) {
  Matrix d(f.rows(), f.cols() + f_star.cols());
  d << f, -f_star;
  return std::max(0.0, (d * sigma * d.transpose()).trace());
}

}  // namespace

StackedCovariance stacked_covariance(const CovariateLaw& law, const Representation& g,
                                     const Representation& g_star, const MonteCarloOptions& mc) {
  validate_law(law);
  require(g.input_dim() == covariate_dim(law) && g_star.input_dim() == covariate_dim(law),
          ErrorCode::InvalidArgument, "stacked_covariance: representation input dims must match the law");
  StackedCovariance out;
  if (use_analytic(g, g_star, mc)) {
    Matrix m(g.output_dim() + g_star.output_dim(), covariate_dim(law));
    m << *g.linear_map(), *g_star.linear_map();
    out.sigma = symmetrize(m * datagen::stationary_second_moment(law) * m.transpose());
    out.analytic = true;
  } else {
    require(mc.samples >= 1, ErrorCode::InvalidArgument, "stacked_covariance: need mc samples >= 1");
    Rng rng(mc.seed);
    const Matrix z = stacked_features(datagen::sample_marginal(law, mc.samples, rng), g, g_star);
    out.sigma = symmetrize(z.transpose() * z / static_cast<double>(z.rows()));
  }
  out.schur = schur_of(out.sigma, g.output_dim());
  return out;
}

namespace {

StackedCovariance task_covariance(const PopulationSpec& spec, std::size_t task, const Representation& g,
                                  const MonteCarloOptions& mc) {
  check_task(spec, task);
  MonteCarloOptions sub = mc;
  sub.seed = derive_seed(mc.seed, task);
  return stacked_covariance(spec.tasks[task].law, g, spec.rep_star, sub);
}

}  // namespace

double mu_x(const PopulationSpec& spec, const Representation& g, const MonteCarloOptions& mc) {
  spec.validate();
  require(spec.num_sources() >= 1, ErrorCode::InvalidArgument, "mu_x: need at least one source task");
  const StackedCovariance target = task_covariance(spec, 0, g, mc);
  const double scale0 = target.sigma.norm();
  if (negligible(target.schur, scale0)) return 0.0;
  double worst = 0.0;
  for (std::size_t t = 1; t < spec.tasks.size(); ++t) {
    const StackedCovariance src = task_covariance(spec, t, g, mc);
    if (negligible(src.schur, src.sigma.norm())) return std::numeric_limits<double>::infinity();
    const Matrix proj = range_projector_psd(src.schur);
    const Matrix outside = target.schur - proj * target.schur * proj;
    if (outside.norm() > 1e-8 * std::max(1.0, target.schur.norm())) return std::numeric_limits<double>::infinity();
    const Matrix w = pinv_sqrt_psd(src.schur);
    worst = std::max(worst, spectral_norm(w * target.schur * w));
  }
  return worst;
}

double mu_x_grid(const PopulationSpec& spec, const std::vector<Representation>& dictionary,
                 const MonteCarloOptions& mc) {
  require(!dictionary.empty(), ErrorCode::EmptyDictionary, "mu_x_grid: empty dictionary");
  double worst = 0.0;
  for (const auto& g : dictionary) worst = std::max(worst, mu_x(spec, g, mc));
  return worst;
}

double mu_f(const std::vector<LinearHead>& heads) {
  require(heads.size() >= 2, ErrorCode::InvalidArgument, "mu_f: need a target head and at least one source");
  const Eigen::Index r = heads.front().F.cols();
  for (const auto& h : heads) require(h.F.cols() == r, ErrorCode::InvalidArgument, "mu_f: heads disagree on r");
  const Matrix target = heads.front().F.transpose() * heads.front().F;
  Matrix sources = Matrix::Zero(r, r);
  for (std::size_t t = 1; t < heads.size(); ++t) sources += heads[t].F.transpose() * heads[t].F;
  sources /= static_cast<double>(heads.size() - 1);
  const Matrix proj = range_projector_psd(sources);
  const double resid = (target - proj * target).norm();
  require(resid <= 1e-8 * std::max(1.0, target.norm()), ErrorCode::RangeViolation,
          "mu_f: target head Gram is not in the range of the source Gram");
  const Matrix w = pinv_sqrt_psd(sources);
  return spectral_norm(w * target * w);
}

double task_risk_population(const PopulationSpec& spec, std::size_t task, const LinearHead& head,
                            const Representation& g, const MonteCarloOptions& mc) {
  spec.validate();
  const StackedCovariance cov = task_covariance(spec, task, g, mc);
  require(head.F.cols() == g.output_dim() && head.F.rows() == spec.dims.d_y, ErrorCode::InvalidArgument,
          "task risk: head shape does not match the representation");
  return risk_from_moment(cov.sigma, head.F, spec.tasks[task].head.F);
}

double excess_risk_population(const PopulationSpec& spec, const LinearHead& head, const Representation& g,
                              const MonteCarloOptions& mc) {
  return task_risk_population(spec, 0, head, g, mc);
}

double estimation_error_avg(const PopulationSpec& spec, const std::vector<LinearHead>& heads,
                            const Representation& g, const MonteCarloOptions& mc) {
  require(heads.size() == spec.num_sources() && !heads.empty(), ErrorCode::InvalidArgument,
          "estimation_error_avg: one head per source task");
  double total = 0.0;
  for (std::size_t t = 1; t < spec.tasks.size(); ++t) total += task_risk_population(spec, t, heads[t - 1], g, mc);
  return total / static_cast<double>(heads.size());
}

double infimal_risk(const PopulationSpec& spec, std::size_t task, const Representation& g,
                    const MonteCarloOptions& mc) {
  spec.validate();
  const StackedCovariance cov = task_covariance(spec, task, g, mc);
  const Matrix& f = spec.tasks[task].head.F;
  return std::max(0.0, (f * cov.schur * f.transpose()).trace());
}

std::optional<double> nu_true(const PopulationSpec& spec, const Representation& g, const MonteCarloOptions& mc) {
  spec.validate();
  require(spec.num_sources() >= 1, ErrorCode::InvalidArgument, "nu_true: need at least one source task");
  const double denom = infimal_risk(spec, 0, g, mc);
  if (denom < kUndefinedThreshold) return std::nullopt;
  double num = 0.0;
  for (std::size_t t = 1; t < spec.tasks.size(); ++t) num += infimal_risk(spec, t, g, mc);
  return num / static_cast<double>(spec.num_sources()) / denom;
}

namespace {

double empirical_infimal_risk(const TaskDataset& task, const Representation& g) {
  const Matrix z = g.apply(task.covariates);
  const double n = static_cast<double>(task.size());
  const Matrix f = erm::ls_head(z, task.labels).F;
  const Matrix cz = z.transpose() * z / n;
  return std::max(0.0, task.labels.squaredNorm() / n - (f * cz * f.transpose()).trace());
}

}  // namespace

std::optional<double> nu_hat(const std::vector<TaskDataset>& data, const Representation& g) {
  require(data.size() >= 2, ErrorCode::InvalidArgument, "nu_hat: need a target and at least one source");
  for (const auto& task : data) task.validate();
  const double denom = empirical_infimal_risk(data.front(), g);
  if (denom < kUndefinedThreshold) return std::nullopt;
  double num = 0.0;
  for (std::size_t t = 1; t < data.size(); ++t) num += empirical_infimal_risk(data[t], g);
  return num / static_cast<double>(data.size() - 1) / denom;
}

namespace {

// Misspecified head and Sigma_Z, exact when both maps are linear.
std::pair<Matrix, Matrix> population_ls(const PopulationSpec& spec, const Representation& g,
                                        const MonteCarloOptions& mc) {
  const StackedCovariance cov = task_covariance(spec, 0, g, mc);
  const Eigen::Index rg = g.output_dim();
  const Matrix s11 = cov.sigma.topLeftCorner(rg, rg);
  const Matrix s21 = cov.sigma.bottomLeftCorner(cov.sigma.rows() - rg, rg);
  const Matrix head = spec.tasks[0].head.F * s21 * pinv(s11);
  return {head, s11};
}

}  // namespace

NrlsQuantities nrls_quantities(const PopulationSpec& spec, const Representation& g, const MonteCarloOptions& mc) {
  spec.validate();
  require(mc.samples >= 1, ErrorCode::InvalidArgument, "nrls_quantities: need mc samples >= 1");
  NrlsQuantities out;
  std::tie(out.misspecified_head, out.sigma_z) = population_ls(spec, g, mc);

  // Fresh draws for the moments, independent of any covariance estimate above.
  Rng rng(derive_seed(derive_seed(mc.seed, 0), 1));
  const Matrix x = datagen::sample_marginal(spec.tasks[0].law, mc.samples, rng);
  const Matrix y = datagen::realizable_labels(spec, 0, x, rng);
  const Matrix z = g.apply(x);
  const Matrix u = y - z * out.misspecified_head.transpose();
  const Matrix zw = z * pinv_sqrt_psd(out.sigma_z);  // whitened features, N x r
  const double n = static_cast<double>(x.rows());

  const Vector u2 = u.rowwise().squaredNorm();
  const Vector v2 = u2.cwiseProduct(zw.rowwise().squaredNorm());  // ||U_i z_i^T S^{-1/2}||_F^2
  out.sigma_u_sq = std::sqrt(u2.array().square().sum() / n);
  out.sigma_v_sq = v2.sum() / n;

  const Eigen::Index r = zw.cols();
  Matrix dirs(r, r + 1000);
  dirs.leftCols(r).setIdentity();
  Rng dir_rng(derive_seed(mc.seed, 0xD1));
  Matrix random_dirs = dir_rng.normal_matrix(r, 1000);
  random_dirs.colwise().normalize();
  dirs.rightCols(1000) = random_dirs;
  double fourth = 0.0;
  for (Eigen::Index c = 0; c < dirs.cols(); c += 16) {
    const Eigen::Index w = std::min<Eigen::Index>(16, dirs.cols() - c);
    const Matrix proj = zw * dirs.middleCols(c, w);
    fourth = std::max(fourth, proj.array().square().square().colwise().sum().maxCoeff() / n);
  }
  out.c_z = std::sqrt(fourth);
  out.h_z = out.c_z;

  // V is numerically zero when it sits at round-off relative to the labels.
  const double label_energy = y.rowwise().squaredNorm().sum() / n;
  if (out.sigma_v_sq > kUndefinedThreshold * label_energy * static_cast<double>(r)) {
    const Vector vnorm = v2.cwiseSqrt();
    double psi1 = 0.0;
    for (int p = 1; p <= 8; ++p) {
      const double moment = vnorm.array().pow(p).sum() / n;
      psi1 = std::max(psi1, std::pow(moment, 1.0 / p) / p);
    }
    out.h_v = psi1 * psi1 / out.sigma_v_sq;
  }
  return out;
}

double nrls_excess_term(const PopulationSpec& spec, const LinearHead& head, const Representation& g,
                        const MonteCarloOptions& mc) {
  spec.validate();
  const auto [f_star, sigma_z] = population_ls(spec, g, mc);
  require(head.F.rows() == f_star.rows() && head.F.cols() == f_star.cols(), ErrorCode::InvalidArgument,
          "nrls_excess_term: head shape mismatch");
  const Matrix d = head.F - f_star;
  return std::max(0.0, (d * sigma_z * d.transpose()).trace());
}

HypercontractivityResult hypercontractivity_c42(const std::vector<CovariateLaw>& laws,
                                                const std::vector<HypothesisMap>& grid,
                                                const MonteCarloOptions& mc) {
  require(!laws.empty() && !grid.empty(), ErrorCode::InvalidArgument,
          "hypercontractivity_c42: need at least one law and one hypothesis");
  const std::size_t per_law = std::max<std::size_t>(1, mc.samples / laws.size());
  std::vector<Matrix> draws;
  for (std::size_t l = 0; l < laws.size(); ++l) {
    Rng rng(derive_seed(mc.seed, l));
    draws.push_back(datagen::sample_marginal(laws[l], per_law, rng));
  }
  HypercontractivityResult out;
  bool any = false;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double m2 = 0.0;
    double m4 = 0.0;
    double count = 0.0;
    for (const auto& x : draws) {
      const Vector sq = grid[k](x).rowwise().squaredNorm();
      m2 += sq.sum();
      m4 += sq.squaredNorm();
      count += static_cast<double>(x.rows());
    }
    m2 /= count;
    m4 /= count;
    if (m2 < 1e-14) {
      ++out.skipped;
      continue;
    }
    const double ratio = m4 / (m2 * m2);
    if (!any || ratio > out.c42) {
      out.c42 = ratio;
      out.argmax = k;
      any = true;
    }
  }
  require(any, ErrorCode::InvalidArgument, "hypercontractivity_c42: every grid member is degenerate");
  return out;
}

DiagnosticsReport diagnose(const PopulationSpec& spec, const std::vector<TaskDataset>& data,
                           const std::vector<LinearHead>& source_heads, const LinearHead& target_head,
                           const Representation& g, const MonteCarloOptions& mc) {
  DiagnosticsReport rep;
  rep.analytic = use_analytic(g, spec.rep_star, mc);
  const double mx = mu_x(spec, g, mc);
  if (std::isfinite(mx)) rep.mu_x = mx;
  std::vector<LinearHead> true_heads;
  for (const auto& task : spec.tasks) true_heads.push_back(task.head);
  try {
    rep.mu_f = mu_f(true_heads);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RangeViolation) throw;
  }
  rep.nu_true = nu_true(spec, g, mc);
  rep.nu_hat = nu_hat(data, g);
  rep.excess_risk_target = excess_risk_population(spec, target_head, g, mc);
  rep.est_error_avg = estimation_error_avg(spec, source_heads, g, mc);
  rep.nrls_excess = nrls_excess_term(spec, target_head, g, mc);
  rep.nrls = nrls_quantities(spec, g, mc);
  return rep;
}

}  // namespace mtrl::diagnostics
