#include "mtrl/mixing.hpp"

#include <algorithm>
#include <cmath>

#include "mtrl/datagen.hpp"
#include "mtrl/error.hpp"
#include "mtrl/rng.hpp"

namespace mtrl::mixing {

const char* to_string(ProfileKind kind) noexcept {
  return kind == ProfileKind::Exact ? "exact" : "geometric";
}

namespace {

void validate_rate(const GeometricRate& rate) {
  require(std::isfinite(rate.gamma) && rate.gamma >= 0.0, ErrorCode::InvalidArgument,
          "geometric profile: gamma must be finite and >= 0");
  require(rate.rho >= 0.0 && rate.rho < 1.0, ErrorCode::InvalidArgument,
          "geometric profile: rho must lie in [0, 1)");
}

double geometric_phi(const GeometricRate& rate, std::size_t i) {
  return std::min(1.0, rate.gamma * std::pow(rate.rho, static_cast<double>(i)));
}

}  // namespace

double MixingProfile::phi_at(std::size_t i) const {
  require(i >= 1, ErrorCode::InvalidArgument, "phi_at: lags start at 1");
  if (kind == ProfileKind::Geometric) return geometric_phi(rate, i);
  if (i <= phi.size()) return phi[i - 1];
  return tail ? geometric_phi(*tail, i) : 0.0;
}

MixingProfile exact_profile(std::vector<double> phi, std::optional<GeometricRate> tail) {
  for (std::size_t i = 0; i < phi.size(); ++i) {
    require(std::isfinite(phi[i]) && phi[i] >= 0.0 && phi[i] <= 1.0, ErrorCode::InvalidArgument,
            "exact profile: phi values must lie in [0, 1]");
    require(i == 0 || phi[i] <= phi[i - 1] + 1e-12, ErrorCode::InvalidArgument,
            "exact profile: phi must be non-increasing in the lag");
  }
  if (tail) validate_rate(*tail);
  MixingProfile p;
  p.kind = ProfileKind::Exact;
  p.phi = std::move(phi);
  p.tail = tail;
  p.phi_capital = phi_capital(p);
  return p;
}

MixingProfile geometric_profile(double gamma, double rho) {
  MixingProfile p;
  p.kind = ProfileKind::Geometric;
  p.rate = {gamma, rho};
  validate_rate(p.rate);
  p.phi_capital = phi_capital(p);
  return p;
}

MixingProfile phi_markov(const Matrix& p, std::size_t max_lag) {
  validate_row_stochastic(p);
  const Vector pi = stationary_distribution(p);
  std::vector<double> phi;
  phi.reserve(max_lag);
  Matrix power = p;
  for (std::size_t i = 1; i <= max_lag; ++i) {
    const Matrix gap = power.rowwise() - pi.transpose();
    phi.push_back(std::clamp(0.5 * gap.rowwise().lpNorm<1>().maxCoeff(), 0.0, 1.0));
    power = power * p;
  }
  // Round-off can break monotonicity by a few ulps; TV to stationarity is
  // non-increasing for any Markov chain, so re-impose it.
  for (std::size_t i = 1; i < phi.size(); ++i) phi[i] = std::min(phi[i], phi[i - 1]);
  return exact_profile(std::move(phi));
}

double lds_lag_one_pinsker(const Matrix& a, std::size_t mc_samples, std::uint64_t seed) {
  require(mc_samples >= 1, ErrorCode::InvalidArgument, "lds_lag_one_pinsker: need mc samples >= 1");
  const Matrix sigma = datagen::lyapunov_stationary(a);
  const auto d = static_cast<double>(a.rows());
  const Eigen::LLT<Matrix> llt(sigma);
  const Matrix sigma_inv = llt.solve(Matrix::Identity(a.rows(), a.rows()));
  const double base = 0.5 * (sigma_inv.trace() - d + log_det_spd(sigma));
  Rng rng(seed);
  const Matrix x = datagen::sample_marginal(LdsLaw{a}, mc_samples, rng);
  const Matrix mean = x * a.transpose();  // rows A x_i
  const Vector quad = (mean * sigma_inv).cwiseProduct(mean).rowwise().sum();
  double total = 0.0;
  for (Eigen::Index i = 0; i < quad.size(); ++i) {
    const double kl = std::max(0.0, base + 0.5 * quad(i));
    total += std::min(1.0, std::sqrt(kl / 2.0));
  }
  return total / static_cast<double>(quad.size());
}

MixingProfile geometric_profile_from_lds(const Matrix& a, std::size_t mc_samples, std::uint64_t seed) {
  const double rho0 = spectral_radius(a);
  require(rho0 < 1.0, ErrorCode::UnstableSystem, "geometric_profile_from_lds: spectral radius must be < 1");
  const double rho = rho0 * rho0;
  const double lag_one = lds_lag_one_pinsker(a, mc_samples, seed);
  double gamma = 0.0;
  if (rho > 0.0) {
    gamma = lag_one / rho;
  } else {
    require(lag_one <= 1e-15, ErrorCode::InvalidArgument,
            "geometric_profile_from_lds: nilpotent A with lag-one dependence has no geometric rate");
  }
  MixingProfile p = geometric_profile(gamma, rho);
  p.expected_tv_surrogate = true;
  return p;
}

double phi_capital(const MixingProfile& profile) {
  if (profile.kind == ProfileKind::Geometric) {
    const double denom = 1.0 - std::sqrt(profile.rate.rho);
    return profile.rate.gamma / (denom * denom);
  }
  double s = 0.0;
  for (double v : profile.phi) s += std::sqrt(v);
  if (profile.tail) {
    // sum_{i > L} sqrt(gamma rho^i) = sqrt(gamma) rho^{(L+1)/2} / (1 - sqrt(rho))
    const double root = std::sqrt(profile.tail->rho);
    s += std::sqrt(profile.tail->gamma) * std::pow(root, static_cast<double>(profile.phi.size() + 1)) /
         (1.0 - root);
  }
  return s * s;
}

DependencyBound dependency_matrix_bound(const MixingProfile& profile, std::size_t n) {
  require(n >= 1, ErrorCode::InvalidArgument, "dependency_matrix_bound: need n >= 1");
  const auto size = static_cast<Eigen::Index>(n);
  std::vector<double> band(n, 0.0);  // band[l] = sqrt(2 phi(l)), l >= 1
  double root_sum = 0.0;
  for (std::size_t l = 1; l < n; ++l) {
    const double phi = profile.phi_at(l);
    band[l] = std::sqrt(2.0 * phi);
    root_sum += std::sqrt(phi);
  }
  DependencyBound out;
  out.matrix = Matrix::Identity(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = i + 1; j < size; ++j) out.matrix(i, j) = band[static_cast<std::size_t>(j - i)];
  }
  out.spectral_norm = spectral_norm(out.matrix);
  out.row_sum_bound = 1.0 + std::sqrt(2.0) * root_sum;
  require(out.spectral_norm <= out.row_sum_bound + 1e-9, ErrorCode::InvalidArgument,
          "dependency_matrix_bound: norm exceeds the row-sum bound");
  return out;
}

std::vector<std::size_t> BlockPartition::odd_blocks() const {
  std::vector<std::size_t> idx;
  for (std::size_t b = 0; b < blocks.size(); b += 2) idx.push_back(b);
  return idx;
}

std::vector<std::size_t> BlockPartition::even_blocks() const {
  std::vector<std::size_t> idx;
  for (std::size_t b = 1; b < blocks.size(); b += 2) idx.push_back(b);
  return idx;
}

BlockPartition make_blocks(std::size_t n, std::size_t k) {
  require(k >= 1 && n >= 1 && n % k == 0 && (n / k) % 2 == 0, ErrorCode::BadPartition,
          "make_blocks: k must divide n with n / k even");
  BlockPartition out;
  out.n = n;
  out.k = k;
  for (std::size_t begin = 0; begin < n; begin += k) out.blocks.emplace_back(begin, begin + k);
  return out;
}

Matrix decouple_trajectory(const CovariateLaw& law, const BlockPartition& partition, std::uint64_t seed) {
  validate_law(law);
  require(partition.num_blocks() >= 1, ErrorCode::BadPartition, "decouple_trajectory: empty partition");
  Matrix out(static_cast<Eigen::Index>(partition.n), covariate_dim(law));
  for (std::size_t b = 0; b < partition.num_blocks(); ++b) {
    const auto [begin, end] = partition.blocks[b];
    Rng rng(derive_seed(seed, b));
    out.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
        datagen::sample_path(law, end - begin, rng, 0);
  }
  return out;
}

std::size_t select_block_length(const MixingProfile& profile, std::size_t m, double delta) {
  require(profile.kind == ProfileKind::Geometric, ErrorCode::InvalidArgument,
          "select_block_length: needs a geometric profile");
  require(delta > 0.0 && delta < 1.0, ErrorCode::InvalidArgument, "select_block_length: delta must lie in (0, 1)");
  require(m >= 2, ErrorCode::SampleTooShort, "select_block_length: need at least two samples");
  const double gamma = profile.rate.gamma;
  const double rho = profile.rate.rho;
  std::size_t k = 1;
  const double ratio = gamma * static_cast<double>(m) / delta;
  if (rho > 0.0 && ratio > 1.0) {
    const double raw = std::log(ratio) / std::log(1.0 / rho);
    require(raw <= static_cast<double>(m), ErrorCode::SampleTooShort, "select_block_length: block exceeds sample");
    k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw)));
  }
  for (; k <= m / 2; ++k) {
    if (m % k == 0 && (m / k) % 2 == 0) break;
  }
  require(k <= m / 2, ErrorCode::SampleTooShort, "select_block_length: no admissible block length");
  const double achieved = static_cast<double>(m / k) * gamma * std::pow(rho, static_cast<double>(k));
  require(achieved <= delta * (1.0 + 1e-12), ErrorCode::SampleTooShort,
          "select_block_length: post-condition (m/k) phi(k) <= delta failed");
  return k;
}

}  // namespace mtrl::mixing
