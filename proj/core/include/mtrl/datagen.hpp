#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mtrl/rng.hpp"
#include "mtrl/types.hpp"

namespace mtrl::datagen {

/// Stationary covariance of x_{i+1} = A x_i + w_i, w_i ~ N(0, I): the unique
/// solution of S = A S A^T + I. Throws UnstableSystem when rho(A) >= 1.
Matrix lyapunov_stationary(const Matrix& a);

/// E[x x^T] under the law's stationary marginal (all laws are zero mean).
Matrix stationary_second_moment(const CovariateLaw& law);

/// 10 * ceil(1 / (1 - rho(A))) warm-up steps for LDS trajectories.
std::size_t default_burn_in(const Matrix& a);

struct SampleRequest {
  PopulationSpec spec;
  std::vector<std::size_t> per_task_n;  // one count per task, target first
  std::uint64_t seed = 0;
  std::optional<std::size_t> burn_in_steps;  // default_burn_in when unset
};

/// Per-task RNG seed: seed XOR (t + 1) * golden-ratio constant.
constexpr std::uint64_t task_seed(std::uint64_t seed, std::size_t t) noexcept {
  return derive_seed(seed, t);
}

/// n iid draws from the stationary marginal of the law (N x d_x).
Matrix sample_marginal(const CovariateLaw& law, std::size_t n, Rng& rng);

/// One contiguous path of length n started from the stationary law. Gaussian
/// laws yield iid rows; LDS paths discard `burn_in` steps (default_burn_in
/// when unset) after the stationary start.
Matrix sample_path(const CovariateLaw& law, std::size_t n, Rng& rng,
                   std::optional<std::size_t> burn_in = std::nullopt);

/// Labels y_i = F_t g_*(x_i) + sigma_W w_i for fixed covariates.
Matrix realizable_labels(const PopulationSpec& spec, std::size_t task, const Matrix& x, Rng& rng);

TaskDataset sample_task(const PopulationSpec& spec, std::size_t task, std::size_t n,
                        std::uint64_t seed, std::optional<std::size_t> burn_in = std::nullopt);

/// Samples every task of the request. Task t uses its own stream seeded by
/// task_seed(req.seed, t), so the result does not depend on `threads`.
std::vector<TaskDataset> sample_tasks(const SampleRequest& req, unsigned threads = 1);

enum class CovariateFamily { Identity, RandomSpd, Lds };

struct LinearInstanceOptions {
  Dims dims;
  std::size_t num_sources = 1;
  double noise_sigma = 0.0;
  CovariateFamily covariates = CovariateFamily::Identity;
  double lds_rho = 0.5;            // spectral radius for CovariateFamily::Lds
  double spd_min_eig = 0.5;        // eigenvalue range for CovariateFamily::RandomSpd
  double spd_max_eig = 2.0;
  bool identical_covariates = false;  // every task reuses the target law
  double head_scale = 1.0;
};

/// Random realizable linear instance: G_* with orthonormal rows, Gaussian
/// heads with entries N(0, head_scale^2 / r), covariate laws per `covariates`.
PopulationSpec make_linear_instance(const LinearInstanceOptions& opts, std::uint64_t seed);

/// Header x_1..x_{d_x}, y_1..y_{d_y}; one row per sample, 17 significant digits.
void write_csv(const TaskDataset& data, std::ostream& out);

}  // namespace mtrl::datagen
