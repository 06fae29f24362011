#include <doctest.h>

#include "../support/oracles.hpp"
#include "mtrl/error.hpp"
#include "mtrl/smallball.hpp"

using namespace mtrl;
using namespace mtrl::smallball;

namespace {

const CovariateLaw kGauss = GaussianLaw{Matrix::Identity(1, 1)};

Hypothesis scaled(double c) {
  return [c](const Matrix& x) -> Matrix { return c * x; };
}

}  // namespace

TEST_CASE("small-ball quantity: trivial thresholds") {
  const std::vector<Hypothesis> grid{scaled(1.0), scaled(0.5)};
  CHECK(smallball_q(kGauss, grid, 0.0, 1000, 1).q_value == 1.0);
  const Hypothesis bounded = [](const Matrix& x) -> Matrix { return x.array().tanh().matrix(); };
  CHECK(smallball_q(kGauss, {bounded}, 1.5, 1000, 1).q_value == 0.0);
}

TEST_CASE("small-ball quantity: Gaussian two-sided tail") {
  const auto est = smallball_q(kGauss, {scaled(1.0)}, 1.0, 200000, 7);
  const double truth = 2.0 * oracle::normal_sf(1.0);
  CHECK(truth == doctest::Approx(0.3173).epsilon(1e-3));
  CHECK(std::abs(est.q_value - truth) <= 3.0 * est.std_error);
}

TEST_CASE("small-ball quantity: grid infimum and monotone in u") {
  const std::vector<Hypothesis> grid{scaled(2.0), scaled(0.5), scaled(1.0)};
  const auto est = smallball_q(kGauss, grid, 1.0, 50000, 3);
  CHECK(est.argmin_hypothesis == 1);
  CHECK(est.grid_size == 3);
  double prev = 1.0;
  for (int i = 0; i < 20; ++i) {
    const double q = smallball_q(kGauss, grid, 0.15 * i, 20000, 11).q_value;
    CHECK(q <= prev);
    CHECK(q >= 0.0);
    prev = q;
  }
}

TEST_CASE("Paley-Zygmund closed forms and validation") {
  CHECK(paley_zygmund_lower(1.0, 3.0, 1.0) == 0.0);
  CHECK(paley_zygmund_lower(1.0, 3.0, 0.0) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(paley_zygmund_lower(2.0, 3.0, 0.5), Error);
  CHECK_THROWS_AS(paley_zygmund_lower(1.0, 3.0, 1.5), Error);
  CHECK_THROWS_AS(paley_zygmund_lower(-1.0, 3.0, 0.5), Error);
}

TEST_CASE("Paley-Zygmund is a valid lower bound on random bounded distributions") {
  // Exact tail probabilities of discrete laws on [0, 1].
  std::mt19937_64 eng(103);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int support = 2 + trial % 7;
    std::vector<double> h(support);
    std::vector<double> w(support);
    double total = 0.0;
    for (int i = 0; i < support; ++i) {
      h[i] = u(eng);
      w[i] = u(eng);
      total += w[i];
    }
    double m2 = 0.0;
    double m4 = 0.0;
    for (int i = 0; i < support; ++i) {
      w[i] /= total;
      m2 += w[i] * h[i] * h[i];
      m4 += w[i] * std::pow(h[i], 4);
    }
    for (double theta : {0.0, 0.25, 0.5, 0.9}) {
      double tail = 0.0;
      for (int i = 0; i < support; ++i) tail += h[i] * h[i] > theta * m2 ? w[i] : 0.0;
      CHECK(paley_zygmund_lower(m2, m4, theta) <= tail + 1e-12);
    }
  }
}

TEST_CASE("lower-isometry tail: constant psi never triggers the bad event") {
  TailCheckOptions opts;
  opts.c = 1.0;
  opts.replicates = 200;
  opts.moment_samples = 1000;
  const Psi constant = [](const Matrix& x) -> Vector { return Vector::Constant(x.rows(), 2.0); };
  const auto res = lower_isometry_tail_check(kGauss, constant, opts);
  CHECK(res.empirical_freq == 0.0);
  CHECK(res.within_slack);
}

TEST_CASE("lower-isometry tail: Gaussian square with C = 3") {
  const Psi square = [](const Matrix& x) -> Vector { return x.col(0).array().square(); };
  TailCheckOptions opts;
  opts.c = 3.0;
  opts.m = 64;
  opts.replicates = 5000;
  opts.seed = 17;
  const auto res = lower_isometry_tail_check(kGauss, square, opts);
  CHECK(res.bound == doctest::Approx(std::exp(-64.0 / 24.0)).epsilon(1e-14));
  CHECK(res.bound == doctest::Approx(0.0695).epsilon(1e-3));
  CHECK(res.empirical_freq <= res.bound + 3.0 * res.std_error);
  CHECK(res.within_slack);

  opts.m = 128;
  const auto twice = lower_isometry_tail_check(kGauss, square, opts);
  CHECK(twice.bound == doctest::Approx(res.bound * res.bound).epsilon(1e-12));
  const double noise = 3.0 * std::sqrt(res.empirical_freq * (1 - res.empirical_freq) / 5000.0);
  CHECK(twice.empirical_freq <= res.empirical_freq + noise);
}

TEST_CASE("lower-isometry tail: blocked mode inflates the bound by the dependency norm") {
  const Psi square = [](const Matrix& x) -> Vector { return x.col(0).array().square(); };
  TailCheckOptions opts;
  opts.c = 3.0;
  opts.m = 64;
  opts.replicates = 2000;
  opts.seed = 19;
  const Matrix a = Matrix::Constant(1, 1, 0.5);
  opts.blocked = BlockedMode{mixing::geometric_profile_from_lds(a, 50000, 4), 4};
  const auto res = lower_isometry_tail_check(LdsLaw{a}, square, opts);
  CHECK(res.dependency_norm >= 1.0);
  CHECK(res.bound == doctest::Approx(std::exp(-64.0 / (24.0 * res.dependency_norm * res.dependency_norm))));
  CHECK(res.within_slack);
  opts.blocked->k = 0;
  CHECK_THROWS_AS(lower_isometry_tail_check(LdsLaw{a}, square, opts), Error);
}

TEST_CASE("lower-isometry tail: hypercontractivity precondition is checked first") {
  const Psi square = [](const Matrix& x) -> Vector { return x.col(0).array().square(); };
  TailCheckOptions opts;
  opts.c = 1.0;  // E x^4 = 3 > 1
  opts.replicates = 10;
  try {
    lower_isometry_tail_check(kGauss, square, opts);
    FAIL("expected PreconditionViolated");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PreconditionViolated);
  }
}
