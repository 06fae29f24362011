#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mtrl/mixing.hpp"
#include "mtrl/types.hpp"

namespace mtrl::smallball {

/// A hypothesis evaluated on a batch: N x d_x -> N x d_y; h^2 is the squared
/// row norm.
using Hypothesis = std::function<Matrix(const Matrix&)>;

struct SmallBallEstimate {
  double q_value = 0.0;
  double u = 0.0;
  std::size_t grid_size = 0;
  std::size_t mc_samples = 0;
  std::size_t argmin_hypothesis = 0;
  double std_error = 0.0;  // binomial standard error at the minimiser
};

/// Grid infimum of P(h^2(X) >= u^2) from one shared set of draws, so the
/// estimate is non-increasing in u for a fixed seed.
SmallBallEstimate smallball_q(const CovariateLaw& law, const std::vector<Hypothesis>& grid, double u,
                              std::size_t mc_samples, std::uint64_t seed);

/// (1 - theta)^2 (E h^2)^2 / E h^4, a lower bound on P(h^2 > theta E h^2).
/// Throws InvalidMoments for theta outside [0, 1], negative moments, or
/// fourth < second^2. Returns 0 when both moments vanish.
double paley_zygmund_lower(double second_moment, double fourth_moment, double theta);

/// Non-negative function of a batch: N x d_x -> N.
using Psi = std::function<Vector(const Matrix&)>;

/// Observations are every k-th state of one stationary trajectory, so lag i
/// between observations is lag i k of the process.
struct BlockedMode {
  mixing::MixingProfile profile;
  std::size_t k = 1;
};

struct TailCheckOptions {
  double c = 1.0;  // hypercontractivity constant C
  std::size_t m = 64;
  std::size_t replicates = 5000;
  std::size_t moment_samples = 200000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::optional<BlockedMode> blocked;
};

struct TailCheckResult {
  double empirical_freq = 0.0;
  double bound = 0.0;
  double std_error = 0.0;  // binomial standard error at the bound
  bool within_slack = false;  // empirical_freq <= bound + 3 std_error
  double mean_psi = 0.0;
  double second_moment = 0.0;
  double dependency_norm = 1.0;
};

/// Frequency of (1/m) sum psi(x_i) <= E psi / 2 over independent replicates,
/// against exp(-m / (8 C)) or, in blocked mode, exp(-m / (8 C ||Gamma_dep||^2)).
/// Throws PreconditionViolated when E psi^2 <= C (E psi)^2 fails by more than
/// three delta-method standard errors.
TailCheckResult lower_isometry_tail_check(const CovariateLaw& law, const Psi& psi, const TailCheckOptions& opts);

}  // namespace mtrl::smallball
