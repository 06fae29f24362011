#include "mtrl/datagen.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "mtrl/error.hpp"
#include "mtrl/parallel.hpp"

namespace mtrl::datagen {

Matrix lyapunov_stationary(const Matrix& a) {
  require(a.rows() == a.cols(), ErrorCode::InvalidMatrix, "lyapunov_stationary: A must be square");
  require(spectral_radius(a) < 1.0, ErrorCode::UnstableSystem,
          "lyapunov_stationary: spectral radius must be < 1");
  const Eigen::Index d = a.rows();
  // Smith doubling: after k rounds S holds sum_{j < 2^k} A^j (A^j)^T.
  Matrix s = Matrix::Identity(d, d);
  Matrix ak = a;
  for (int round = 0; round < 80; ++round) {
    const Matrix increment = ak * s * ak.transpose();
    s += increment;
    ak = ak * ak;
    if (increment.norm() <= 1e-17 * s.norm() && ak.norm() <= 1e-17) break;
  }
  return symmetrize(s);
}

Matrix stationary_second_moment(const CovariateLaw& law) {
  if (const auto* g = std::get_if<GaussianLaw>(&law)) return symmetrize(g->sigma);
  if (const auto* lds = std::get_if<LdsLaw>(&law)) return lyapunov_stationary(lds->A);
  const auto& mc = std::get<MarkovChainLaw>(law);
  return symmetrize(mc.embedding.transpose() * mc.stationary.asDiagonal() * mc.embedding);
}

std::size_t default_burn_in(const Matrix& a) {
  const double rho = spectral_radius(a);
  require(rho < 1.0, ErrorCode::UnstableSystem, "default_burn_in: spectral radius must be < 1");
  return 10 * static_cast<std::size_t>(std::ceil(1.0 / (1.0 - rho)));
}

namespace {

Matrix gaussian_rows(const Matrix& root, std::size_t n, Rng& rng) {
  return rng.normal_matrix(static_cast<Eigen::Index>(n), root.rows()) * root;
}

Eigen::Index markov_step(const MarkovChainLaw& mc, Eigen::Index state, Rng& rng) {
  return rng.categorical(mc.P.row(state).transpose());
}

}  // namespace

Matrix sample_marginal(const CovariateLaw& law, std::size_t n, Rng& rng) {
  validate_law(law);
  if (const auto* mc = std::get_if<MarkovChainLaw>(&law)) {
    Matrix x(static_cast<Eigen::Index>(n), mc->embedding.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) = mc->embedding.row(rng.categorical(mc->stationary));
    return x;
  }
  return gaussian_rows(sqrt_psd(stationary_second_moment(law)), n, rng);
}

Matrix sample_path(const CovariateLaw& law, std::size_t n, Rng& rng, std::optional<std::size_t> burn_in) {
  validate_law(law);
  if (std::holds_alternative<GaussianLaw>(law)) return sample_marginal(law, n, rng);

  const auto rows = static_cast<Eigen::Index>(n);
  if (const auto* lds = std::get_if<LdsLaw>(&law)) {
    const Eigen::Index d = lds->A.rows();
    const std::size_t warmup = burn_in.value_or(default_burn_in(lds->A));
    Vector state = sqrt_psd(lyapunov_stationary(lds->A)) * rng.normal_vector(d);
    for (std::size_t i = 0; i < warmup; ++i) state = lds->A * state + rng.normal_vector(d);
    Matrix x(rows, d);
    for (Eigen::Index i = 0; i < rows; ++i) {
      x.row(i) = state.transpose();
      state = lds->A * state + rng.normal_vector(d);
    }
    return x;
  }

  const auto& mc = std::get<MarkovChainLaw>(law);
  Eigen::Index state = rng.categorical(mc.stationary);
  for (std::size_t i = 0; i < burn_in.value_or(0); ++i) state = markov_step(mc, state, rng);
  Matrix x(rows, mc.embedding.cols());
  for (Eigen::Index i = 0; i < rows; ++i) {
    x.row(i) = mc.embedding.row(state);
    state = markov_step(mc, state, rng);
  }
  return x;
}

Matrix realizable_labels(const PopulationSpec& spec, std::size_t task, const Matrix& x, Rng& rng) {
  const Matrix& f = spec.tasks.at(task).head.F;
  Matrix y = spec.rep_star.apply(x) * f.transpose();
  if (spec.noise_sigma > 0.0) y += spec.noise_sigma * rng.normal_matrix(y.rows(), y.cols());
  return y;
}

TaskDataset sample_task(const PopulationSpec& spec, std::size_t task, std::size_t n, std::uint64_t seed,
                        std::optional<std::size_t> burn_in) {
  require(n >= 1, ErrorCode::InvalidArgument, "sample_task: need n >= 1");
  Rng rng(seed);
  const CovariateLaw& law = spec.tasks.at(task).law;
  TaskDataset out;
  out.task_id = static_cast<int>(task);
  out.kind = is_trajectory_law(law) ? SampleKind::Trajectory : SampleKind::IidDraw;
  out.covariates = sample_path(law, n, rng, burn_in);
  // Noise is drawn only after the covariates are fixed.
  out.labels = realizable_labels(spec, task, out.covariates, rng);
  return out;
}

std::vector<TaskDataset> sample_tasks(const SampleRequest& req, unsigned threads) {
  req.spec.validate();
  require(req.per_task_n.size() == req.spec.tasks.size(), ErrorCode::InvalidArgument,
          "sample_tasks: need one sample count per task");
  for (std::size_t n : req.per_task_n) {
    require(n >= 1, ErrorCode::InvalidArgument, "sample_tasks: sample counts must be >= 1");
  }
  std::vector<TaskDataset> out(req.spec.tasks.size());
  parallel_for(out.size(), threads, [&](std::size_t t) {
    out[t] = sample_task(req.spec, t, req.per_task_n[t], task_seed(req.seed, t), req.burn_in_steps);
  });
  return out;
}

PopulationSpec make_linear_instance(const LinearInstanceOptions& opts, std::uint64_t seed) {
  opts.dims.validate();
  require(opts.num_sources >= 1, ErrorCode::InvalidArgument, "make_linear_instance: need >= 1 source");
  Rng rng(seed);
  const int dx = opts.dims.d_x;

  PopulationSpec spec;
  spec.dims = opts.dims;
  spec.noise_sigma = opts.noise_sigma;
  spec.rep_star = Representation::linear(rng.orthonormal_rows(opts.dims.r, dx));

  auto draw_law = [&]() -> CovariateLaw {
    switch (opts.covariates) {
      case CovariateFamily::Identity:
        return GaussianLaw{Matrix::Identity(dx, dx)};
      case CovariateFamily::RandomSpd: {
        const Matrix q = rng.orthonormal_rows(dx, dx);
        Vector eig(dx);
        for (int i = 0; i < dx; ++i) eig(i) = opts.spd_min_eig + (opts.spd_max_eig - opts.spd_min_eig) * rng.uniform();
        return GaussianLaw{symmetrize(q.transpose() * eig.asDiagonal() * q)};
      }
      case CovariateFamily::Lds:
        return LdsLaw{opts.lds_rho * rng.orthonormal_rows(dx, dx)};
    }
    return GaussianLaw{Matrix::Identity(dx, dx)};
  };

  const double head_sd = opts.head_scale / std::sqrt(static_cast<double>(opts.dims.r));
  spec.tasks.reserve(opts.num_sources + 1);
  for (std::size_t t = 0; t <= opts.num_sources; ++t) {
    CovariateLaw law = (opts.identical_covariates && t > 0) ? spec.tasks.front().law : draw_law();
    LinearHead head(head_sd * rng.normal_matrix(opts.dims.d_y, opts.dims.r));
    spec.tasks.push_back(TaskSpec{std::move(law), std::move(head)});
  }
  spec.validate();
  return spec;
}

void write_csv(const TaskDataset& data, std::ostream& out) {
  const Eigen::Index dx = data.covariates.cols();
  const Eigen::Index dy = data.labels.cols();
  for (Eigen::Index j = 0; j < dx; ++j) out << (j ? "," : "") << "x_" << (j + 1);
  for (Eigen::Index j = 0; j < dy; ++j) out << ",y_" << (j + 1);
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < dx; ++j) out << (j ? "," : "") << data.covariates(i, j);
    for (Eigen::Index j = 0; j < dy; ++j) out << ',' << data.labels(i, j);
    out << '\n';
  }
}

}  // namespace mtrl::datagen
