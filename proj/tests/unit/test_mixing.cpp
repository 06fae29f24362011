#include <doctest.h>

#include <numeric>

#include "../support/oracles.hpp"
#include "mtrl/datagen.hpp"
#include "mtrl/error.hpp"
#include "mtrl/mixing.hpp"

using namespace mtrl;
using namespace mtrl::mixing;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected mtrl::Error");
  return ErrorCode::InvalidArgument;
}

// Closed-form KL(N(a x, 1) || N(0, s)) for scalar a, s = 1 / (1 - a^2).
double scalar_kl(double a, double x) {
  const double s = 1.0 / (1.0 - a * a);
  return 0.5 * (1.0 / s - 1.0 + std::log(s) + a * a * x * x / s);
}

}  // namespace

TEST_CASE("phi_markov: iid chain and the deterministic 2-cycle") {
  Matrix iid(3, 3);
  iid.rowwise() = Eigen::RowVector3d(0.2, 0.5, 0.3);
  for (double v : phi_markov(iid, 5).phi) CHECK(v <= 1e-15);

  Matrix cycle(2, 2);
  cycle << 0.0, 1.0, 1.0, 0.0;
  const auto p = phi_markov(cycle, 6);
  REQUIRE(p.phi.size() == 6);
  for (double v : p.phi) CHECK(v == 0.5);
}

TEST_CASE("phi_markov: lazy two-state chain follows the second eigenvalue") {
  const double eps = 0.3;
  const Matrix p = (1.0 - eps) * Matrix::Identity(2, 2) + eps * Matrix::Constant(2, 2, 0.5);
  const auto prof = phi_markov(p, 20);
  for (std::size_t i = 1; i <= 20; ++i) {
    CHECK(std::abs(prof.phi_at(i) - 0.5 * std::pow(1.0 - eps, static_cast<double>(i))) <= 1e-10);
  }
}

TEST_CASE("phi_markov is non-increasing in the lag and rejects reducible chains") {
  std::mt19937_64 eng(89);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix p(4, 4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) p(i, j) = u(eng);
      p.row(i) /= p.row(i).sum();
    }
    const auto prof = phi_markov(p, 15);
    for (std::size_t i = 1; i < prof.phi.size(); ++i) CHECK(prof.phi[i] <= prof.phi[i - 1]);
  }
  CHECK(code_of([] { phi_markov(Matrix::Identity(2, 2), 3); }) == ErrorCode::NotErgodic);
}

TEST_CASE("LDS surrogate: A = 0 and the closed-form scalar KL") {
  const auto zero = geometric_profile_from_lds(Matrix::Zero(2, 2), 1000, 1);
  CHECK(zero.rate.gamma == 0.0);
  CHECK(zero.rate.rho == 0.0);
  for (std::size_t i = 1; i <= 5; ++i) CHECK(zero.phi_at(i) == 0.0);

  const Matrix a = Matrix::Constant(1, 1, 0.5);
  const std::size_t samples = 200000;
  const std::uint64_t seed = 33;
  const auto prof = geometric_profile_from_lds(a, samples, seed);
  CHECK(prof.expected_tv_surrogate);
  CHECK(prof.rate.rho == doctest::Approx(0.25).epsilon(1e-14));

  // Same stationary draws, closed-form KL per draw.
  Rng rng(seed);
  const Matrix x = datagen::sample_marginal(LdsLaw{a}, samples, rng);
  double avg = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) avg += std::min(1.0, std::sqrt(scalar_kl(0.5, x(i, 0)) / 2.0));
  avg /= static_cast<double>(samples);
  CHECK(std::abs(prof.rate.gamma * prof.rate.rho - avg) <= 1e-6);

  // And against a quadrature of the population average.
  const double s = 4.0 / 3.0;
  double quad = 0.0;
  const int steps = 200000;
  const double lim = 12.0 * std::sqrt(s);
  const double h = 2.0 * lim / steps;
  for (int k = 0; k <= steps; ++k) {
    const double xv = -lim + k * h;
    const double w = (k == 0 || k == steps) ? 0.5 : 1.0;
    quad += w * std::min(1.0, std::sqrt(scalar_kl(0.5, xv) / 2.0)) * std::exp(-xv * xv / (2 * s)) /
            std::sqrt(2 * M_PI * s);
  }
  quad *= h;
  CHECK(prof.rate.gamma * prof.rate.rho == doctest::Approx(quad).epsilon(0.01));
}

TEST_CASE("LDS surrogate rate is the squared spectral radius") {
  Matrix a(2, 2);
  a << 0.6, 0.3, 0.0, -0.4;
  const auto prof = geometric_profile_from_lds(a, 10000, 2);
  CHECK(prof.rate.rho == doctest::Approx(0.36).epsilon(1e-12));
  CHECK(code_of([] { geometric_profile_from_lds(Matrix::Identity(1, 1), 10, 1); }) == ErrorCode::UnstableSystem);
}

TEST_CASE("Phi: closed forms") {
  CHECK(phi_capital(exact_profile({0.0, 0.0, 0.0})) == 0.0);
  CHECK(phi_capital(geometric_profile(1.0, 0.25)) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("Phi: closed form matches the geometric series and bounds the lag >= 1 sum") {
  for (double rho : {0.1, 0.25, 0.5, 0.8}) {
    const double gamma = 0.7;
    const double closed = phi_capital(geometric_profile(gamma, rho));
    // sum_{i >= 0} sqrt(gamma rho^i), squared, truncated at 10^4 lags.
    double s = 0.0;
    for (int i = 0; i <= 10000; ++i) s += std::sqrt(gamma * std::pow(rho, i));
    CHECK(std::abs(s * s - closed) <= 1e-8 * closed);

    std::vector<double> phi;
    for (int i = 1; i <= 10000; ++i) phi.push_back(gamma * std::pow(rho, i));
    const double series = phi_capital(exact_profile(phi));
    CHECK(series <= closed);
    CHECK(std::abs(series - rho * closed) <= 1e-8 * closed);
    // A geometric tail attached to a short prefix gives the same lag >= 1 value.
    std::vector<double> prefix(phi.begin(), phi.begin() + 5);
    CHECK(phi_capital(exact_profile(prefix, GeometricRate{gamma, rho})) == doctest::Approx(series).epsilon(1e-10));
  }
}

TEST_CASE("profile validation") {
  CHECK(code_of([] { exact_profile({0.2, 0.3}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { exact_profile({1.2}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { geometric_profile(1.0, 1.0); }) == ErrorCode::InvalidArgument);
  CHECK(geometric_profile(5.0, 0.5).phi_at(1) == 1.0);
}

TEST_CASE("dependency matrix bound") {
  const auto none = dependency_matrix_bound(exact_profile({0.0, 0.0, 0.0}), 4);
  CHECK(none.matrix.isApprox(Matrix::Identity(4, 4)));
  CHECK(none.spectral_norm == doctest::Approx(1.0));

  const auto two = dependency_matrix_bound(exact_profile({0.5}), 2);
  CHECK(two.matrix(0, 1) == doctest::Approx(1.0));
  CHECK(two.spectral_norm == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-12));

  std::mt19937_64 eng(97);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 15;
    std::vector<double> phi(n);
    double cur = u(eng);
    for (auto& v : phi) {
      cur *= u(eng);
      v = cur;
    }
    const auto prof = exact_profile(phi);
    const auto b = dependency_matrix_bound(prof, n);
    double root = 0.0;
    for (std::size_t i = 1; i < n; ++i) root += std::sqrt(phi[i - 1]);
    CHECK(b.spectral_norm <= 1.0 + std::sqrt(2.0) * root + 1e-9);
    CHECK(b.matrix.triangularView<Eigen::StrictlyLower>().toDenseMatrix().norm() == 0.0);
  }
}

TEST_CASE("make_blocks") {
  const auto p = make_blocks(8, 2);
  REQUIRE(p.num_blocks() == 4);
  CHECK(p.blocks[0] == std::pair<std::size_t, std::size_t>{0, 2});
  CHECK(p.blocks[3] == std::pair<std::size_t, std::size_t>{6, 8});
  CHECK(p.odd_blocks() == std::vector<std::size_t>{0, 2});
  CHECK(p.even_blocks() == std::vector<std::size_t>{1, 3});
  CHECK(code_of([] { make_blocks(4, 4); }) == ErrorCode::BadPartition);
  CHECK(code_of([] { make_blocks(10, 3); }) == ErrorCode::BadPartition);

  const auto big = make_blocks(1000, 10);
  REQUIRE(big.num_blocks() == 100);
  std::vector<int> hits(1000, 0);
  for (const auto& [b, e] : big.blocks) {
    CHECK(e - b == 10);
    for (std::size_t i = b; i < e; ++i) ++hits[i];
  }
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}

TEST_CASE("decoupling: two halves are uncorrelated and blocks keep their law") {
  const double a = 0.9;
  const CovariateLaw law = LdsLaw{Matrix::Constant(1, 1, a)};
  const auto part = make_blocks(20, 10);
  const int reps = 2000;
  std::vector<double> cross(reps);
  std::vector<double> var0(reps);
  std::vector<double> lag1(reps);
  for (int r = 0; r < reps; ++r) {
    const Matrix z = decouple_trajectory(law, part, static_cast<std::uint64_t>(r));
    cross[r] = z(9, 0) * z(10, 0);
    var0[r] = z(10, 0) * z(10, 0);
    lag1[r] = z(10, 0) * z(11, 0);
  }
  auto mean_se = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, std::sqrt(ss / (v.size() - 1) / v.size())};
  };
  const double s = 1.0 / (1.0 - a * a);
  const auto [c, c_se] = mean_se(cross);
  CHECK(std::abs(c) <= 3.0 * c_se);
  const auto [v, v_se] = mean_se(var0);
  CHECK(std::abs(v - s) <= 3.0 * v_se);
  const auto [l, l_se] = mean_se(lag1);
  CHECK(std::abs(l - a * s) <= 3.0 * l_se);
}

TEST_CASE("decoupling an iid law matches direct sampling in mean and covariance") {
  Matrix sigma(2, 2);
  sigma << 2.0, 0.6, 0.6, 1.0;
  const CovariateLaw law = GaussianLaw{sigma};
  const auto part = make_blocks(4000, 100);
  const Matrix z = decouple_trajectory(law, part, 5);
  const double n = 4000.0;
  const Matrix cov = z.transpose() * z / n;
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(z.col(i).mean()) <= 3.0 * std::sqrt(sigma(i, i) / n));
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / n);
      CHECK(std::abs(cov(i, j) - sigma(i, j)) <= 3.0 * se);
    }
  }
}

TEST_CASE("decoupling inequality on a lazy Markov chain") {
  const double eps = 0.2;
  const Matrix p = (1.0 - eps) * Matrix::Identity(2, 2) + eps * Matrix::Constant(2, 2, 0.5);
  const auto law = MarkovChainLaw::with_centred_basis(p, 1);
  const auto prof = phi_markov(p, 64);
  const std::size_t k = 4;
  const auto part = make_blocks(32, k);
  // f = clipped average over the odd blocks, values in [0, 1].
  auto f = [&](const Matrix& z) {
    double s = 0.0;
    for (auto b : part.odd_blocks()) s += z.middleRows(part.blocks[b].first, k).sum();
    return std::clamp(0.5 + 4.0 * s / (k * part.odd_blocks().size()), 0.0, 1.0);
  };
  const int reps = 20000;
  double direct = 0.0;
  double direct_sq = 0.0;
  double decoupled = 0.0;
  double decoupled_sq = 0.0;
  for (int r = 0; r < reps; ++r) {
    Rng rng(derive_seed(777, r));
    const double a = f(datagen::sample_path(CovariateLaw{law}, 32, rng, 0));
    const double b = f(decouple_trajectory(CovariateLaw{law}, part, derive_seed(999, r)));
    direct += a;
    direct_sq += a * a;
    decoupled += b;
    decoupled_sq += b * b;
  }
  direct /= reps;
  decoupled /= reps;
  const double se = std::sqrt((direct_sq / reps - direct * direct + decoupled_sq / reps - decoupled * decoupled) / reps);
  double budget = 0.0;
  const auto even = part.even_blocks();
  for (std::size_t i = 0; i + 1 < even.size(); ++i) budget += prof.phi_at(k);  // interior even blocks
  CHECK(std::abs(direct - decoupled) <= budget + 3.0 * se);
}

TEST_CASE("select_block_length: worked examples") {
  const auto prof = geometric_profile(1.0, std::exp(-1.0));
  // ceil(log(2000 / 0.1)) = 10, which divides 2000 with 200 blocks.
  CHECK(select_block_length(prof, 2000, 0.1) == 10);
  // ceil(log(10240)) = 10, next admissible divisor of 1024 is 16.
  CHECK(select_block_length(prof, 1024, 0.1) == 16);
  const auto fast = geometric_profile(1.0, 1e-300);
  CHECK(select_block_length(fast, 10, 0.1) == 1);
  CHECK(code_of([&] { select_block_length(fast, 9, 0.1); }) == ErrorCode::SampleTooShort);
  CHECK(code_of([&] { select_block_length(geometric_profile(1.0, 0.99), 64, 0.01); }) == ErrorCode::SampleTooShort);
  CHECK(code_of([&] { select_block_length(exact_profile({0.1}), 64, 0.1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("select_block_length satisfies its post-condition on random configurations") {
  std::mt19937_64 eng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int accepted = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double gamma = 0.1 + 5.0 * u(eng);
    const double rho = 0.05 + 0.85 * u(eng);
    const std::size_t m = 2 * (50 + static_cast<std::size_t>(2000 * u(eng)));
    const double delta = 0.01 + 0.3 * u(eng);
    const auto prof = geometric_profile(gamma, rho);
    try {
      const std::size_t k = select_block_length(prof, m, delta);
      CHECK(m % k == 0);
      CHECK((m / k) % 2 == 0);
      CHECK(static_cast<double>(m / k) * gamma * std::pow(rho, static_cast<double>(k)) <= delta);
      ++accepted;
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SampleTooShort);
    }
  }
  CHECK(accepted >= 50);
}
