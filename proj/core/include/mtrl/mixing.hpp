#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mtrl/types.hpp"

namespace mtrl::mixing {

enum class ProfileKind { Exact, Geometric };

const char* to_string(ProfileKind kind) noexcept;

/// phi(i) <= gamma * rho^i for i >= 1.
struct GeometricRate {
  double gamma = 0.0;
  double rho = 0.0;
};

/// Mixing coefficients of a stationary process. Exact profiles list
/// phi(1..max_lag) and may carry a geometric tail for lags past max_lag.
struct MixingProfile {
  ProfileKind kind = ProfileKind::Exact;
  std::vector<double> phi;  // phi[i - 1] = phi(i)
  std::optional<GeometricRate> tail;  // Exact only
  GeometricRate rate;                 // Geometric only
  bool expected_tv_surrogate = false;  // Geometric built from averaged TV, not a sup
  double phi_capital = 0.0;

  std::size_t max_lag() const noexcept { return phi.size(); }
  /// phi(i) for i >= 1; geometric values are capped at 1 (a TV distance).
  double phi_at(std::size_t i) const;
};

/// Builds an Exact profile and fills phi_capital. Throws InvalidArgument
/// unless every value is in [0, 1] and the sequence is non-increasing.
MixingProfile exact_profile(std::vector<double> phi, std::optional<GeometricRate> tail = std::nullopt);

/// Throws InvalidArgument unless gamma >= 0 and rho in [0, 1).
MixingProfile geometric_profile(double gamma, double rho);

/// phi(i) = max_s TV(P^i(s, .), pi) for i = 1..max_lag. Throws NotErgodic when
/// the stationary law is not unique.
MixingProfile phi_markov(const Matrix& p, std::size_t max_lag);

/// Expected-TV surrogate for x_{i+1} = A x_i + w_i: rho = rho(A)^2 and gamma
/// chosen so gamma * rho equals the Monte Carlo average over stationary x of
/// min(1, sqrt(KL(N(Ax, I) || N(0, Sigma)) / 2)). For A = 0 both are zero.
/// Throws UnstableSystem when rho(A) >= 1.
MixingProfile geometric_profile_from_lds(const Matrix& a, std::size_t mc_samples, std::uint64_t seed);

/// Lag-one averaged Pinsker bound used by geometric_profile_from_lds.
double lds_lag_one_pinsker(const Matrix& a, std::size_t mc_samples, std::uint64_t seed);

/// Exact: (sum_{i>=1} sqrt(phi(i)))^2 including any attached tail.
/// Geometric: gamma / (1 - sqrt(rho))^2.
double phi_capital(const MixingProfile& profile);

struct DependencyBound {
  Matrix matrix;  // n x n upper triangular
  double spectral_norm = 0.0;
  double row_sum_bound = 0.0;  // 1 + sqrt(2) * sum_{i<n} sqrt(phi(i))
};

/// Unit diagonal and sqrt(2 phi(j - i)) above it. Geometric profiles are
/// expanded to lags 1..n-1; exact profiles past max_lag use the tail or 0.
DependencyBound dependency_matrix_bound(const MixingProfile& profile, std::size_t n);

/// 2m equal consecutive blocks of length k over n samples. Blocks are stored
/// as 0-based half-open ranges [begin, end).
struct BlockPartition {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::pair<std::size_t, std::size_t>> blocks;

  std::size_t num_blocks() const noexcept { return blocks.size(); }
  /// Blocks 1, 3, 5, ... in 1-based numbering (0-based indices 0, 2, 4, ...).
  std::vector<std::size_t> odd_blocks() const;
  /// Blocks 2, 4, 6, ... in 1-based numbering.
  std::vector<std::size_t> even_blocks() const;
};

/// Throws BadPartition unless k >= 1 divides n and n / k is even.
BlockPartition make_blocks(std::size_t n, std::size_t k);

/// A sample with the partition's block structure where every block is a fresh
/// stationary segment of the law, independent of all other blocks.
Matrix decouple_trajectory(const CovariateLaw& law, const BlockPartition& partition, std::uint64_t seed);

/// Smallest k >= ceil(log(gamma m / delta) / log(1 / rho)) (and >= 1) that
/// divides m with m / k even. Throws SampleTooShort if none is <= m / 2 and
/// InvalidArgument for a non-geometric profile or delta outside (0, 1).
std::size_t select_block_length(const MixingProfile& profile, std::size_t m, double delta);

}  // namespace mtrl::mixing
