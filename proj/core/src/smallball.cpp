#include "mtrl/smallball.hpp"

#include <algorithm>
#include <cmath>

#include "mtrl/datagen.hpp"
#include "mtrl/error.hpp"
#include "mtrl/parallel.hpp"
#include "mtrl/rng.hpp"

namespace mtrl::smallball {

SmallBallEstimate smallball_q(const CovariateLaw& law, const std::vector<Hypothesis>& grid, double u,
                              std::size_t mc_samples, std::uint64_t seed) {
  require(!grid.empty(), ErrorCode::InvalidArgument, "smallball_q: empty hypothesis grid");
  require(mc_samples >= 1 && u >= 0.0, ErrorCode::InvalidArgument, "smallball_q: need samples >= 1 and u >= 0");
  Rng rng(seed);
  const Matrix x = datagen::sample_marginal(law, mc_samples, rng);
  const double n = static_cast<double>(mc_samples);
  SmallBallEstimate out;
  out.u = u;
  out.grid_size = grid.size();
  out.mc_samples = mc_samples;
  out.q_value = 2.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vector h2 = grid[k](x).rowwise().squaredNorm();
    const double hits = static_cast<double>((h2.array() >= u * u).count());
    if (hits / n < out.q_value) {
      out.q_value = hits / n;
      out.argmin_hypothesis = k;
    }
  }
  out.std_error = std::sqrt(out.q_value * (1.0 - out.q_value) / n);
  return out;
}

double paley_zygmund_lower(double second_moment, double fourth_moment, double theta) {
  require(theta >= 0.0 && theta <= 1.0, ErrorCode::InvalidMoments, "paley_zygmund_lower: theta must lie in [0, 1]");
  require(second_moment >= 0.0 && fourth_moment >= 0.0, ErrorCode::InvalidMoments,
          "paley_zygmund_lower: moments must be non-negative");
  require(fourth_moment >= second_moment * second_moment * (1.0 - 1e-12), ErrorCode::InvalidMoments,
          "paley_zygmund_lower: fourth moment below squared second moment");
  if (fourth_moment == 0.0) return 0.0;
  const double bound = (1.0 - theta) * (1.0 - theta) * second_moment * second_moment / fourth_moment;
  return std::clamp(bound, 0.0, 1.0);
}

namespace {

// Observation block for one replicate: m iid draws, or every k-th state of a
// stationary path in blocked mode.
Matrix replicate_sample(const CovariateLaw& law, const TailCheckOptions& opts, Rng& rng) {
  if (!opts.blocked) return datagen::sample_marginal(law, opts.m, rng);
  const std::size_t k = opts.blocked->k;
  const Matrix path = datagen::sample_path(law, opts.m * k, rng, 0);
  Matrix out(static_cast<Eigen::Index>(opts.m), path.cols());
  for (std::size_t i = 0; i < opts.m; ++i) out.row(static_cast<Eigen::Index>(i)) = path.row(static_cast<Eigen::Index>(i * k));
  return out;
}

}  // namespace

TailCheckResult lower_isometry_tail_check(const CovariateLaw& law, const Psi& psi, const TailCheckOptions& opts) {
  validate_law(law);
  require(opts.c > 0.0 && opts.m >= 1 && opts.replicates >= 1 && opts.moment_samples >= 2,
          ErrorCode::InvalidArgument, "lower_isometry_tail_check: C, m, replicates, moment samples must be positive");
  TailCheckResult out;

  Rng moment_rng(derive_seed(opts.seed, 0));
  const Vector values = psi(datagen::sample_marginal(law, opts.moment_samples, moment_rng));
  require(values.size() == static_cast<Eigen::Index>(opts.moment_samples) && values.minCoeff() >= 0.0,
          ErrorCode::InvalidArgument, "lower_isometry_tail_check: psi must return one non-negative value per row");
  const double n = static_cast<double>(values.size());
  out.mean_psi = values.mean();
  out.second_moment = values.squaredNorm() / n;
  // Delta method for E psi^2 - C (E psi)^2: influence psi^2 - 2 C E[psi] psi.
  const Vector influence = values.array().square() - 2.0 * opts.c * out.mean_psi * values.array();
  const double var = (influence.array() - influence.mean()).square().sum() / (n - 1.0);
  const double excess = out.second_moment - opts.c * out.mean_psi * out.mean_psi;
  require(excess <= 3.0 * std::sqrt(var / n), ErrorCode::PreconditionViolated,
          "lower_isometry_tail_check: E psi^2 <= C (E psi)^2 fails");

  double denom = 8.0 * opts.c;
  if (opts.blocked) {
    require(opts.blocked->k >= 1, ErrorCode::InvalidArgument, "lower_isometry_tail_check: blocked stride k >= 1");
    require(is_trajectory_law(law), ErrorCode::InvalidArgument,
            "lower_isometry_tail_check: blocked mode needs a trajectory law");
    std::vector<double> strided;
    for (std::size_t i = 1; i < opts.m; ++i) strided.push_back(opts.blocked->profile.phi_at(i * opts.blocked->k));
    const auto sub = mixing::exact_profile(std::move(strided));
    out.dependency_norm = mixing::dependency_matrix_bound(sub, opts.m).spectral_norm;
    denom *= out.dependency_norm * out.dependency_norm;
  }
  out.bound = std::exp(-static_cast<double>(opts.m) / denom);

  std::vector<char> bad(opts.replicates, 0);
  const double threshold = 0.5 * out.mean_psi;
  parallel_for(opts.replicates, opts.threads, [&](std::size_t rep) {
    Rng rng(derive_seed(opts.seed, rep + 1));
    bad[rep] = psi(replicate_sample(law, opts, rng)).mean() <= threshold ? 1 : 0;
  });
  const double reps = static_cast<double>(opts.replicates);
  out.empirical_freq = static_cast<double>(std::count(bad.begin(), bad.end(), 1)) / reps;
  out.std_error = std::sqrt(out.bound * (1.0 - out.bound) / reps);
  out.within_slack = out.empirical_freq <= out.bound + 3.0 * out.std_error;
  return out;
}

}  // namespace mtrl::smallball
