#include <doctest.h>

#include "../support/oracles.hpp"
#include "mtrl/datagen.hpp"
#include "mtrl/diagnostics.hpp"
#include "mtrl/erm.hpp"
#include "mtrl/error.hpp"

using namespace mtrl;
using namespace mtrl::diagnostics;

namespace {

PopulationSpec random_instance(std::uint64_t seed, int d_x = 6, int d_y = 1, int r = 2, std::size_t t = 4,
                               double noise = 0.0, bool identical = false) {
  datagen::LinearInstanceOptions opts;
  opts.dims = Dims{d_x, d_y, r};
  opts.num_sources = t;
  opts.noise_sigma = noise;
  opts.covariates = datagen::CovariateFamily::RandomSpd;
  opts.identical_covariates = identical;
  return datagen::make_linear_instance(opts, seed);
}

Representation random_rep(std::uint64_t seed, int r, int d_x) {
  Rng rng(seed);
  return Representation::linear(rng.normal_matrix(r, d_x));
}

double min_eig(const Matrix& m) { return Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(m)).eigenvalues().minCoeff(); }

MonteCarloOptions forced(std::size_t samples, std::uint64_t seed) {
  MonteCarloOptions mc;
  mc.samples = samples;
  mc.seed = seed;
  mc.force = true;
  return mc;
}

}  // namespace

TEST_CASE("stacked covariance: perfect representation and the hand Schur complement") {
  const auto spec = random_instance(1);
  const auto cov = stacked_covariance(spec.tasks[0].law, spec.rep_star, spec.rep_star);
  CHECK(cov.analytic);
  CHECK(cov.schur.norm() <= 1e-12 * cov.sigma.norm());

  Matrix sigma(2, 2);
  sigma << 1.0, 0.5, 0.5, 1.0;
  Matrix e1 = Matrix::Zero(1, 2);
  Matrix e2 = Matrix::Zero(1, 2);
  e1(0, 0) = 1.0;
  e2(0, 1) = 1.0;
  const auto toy = stacked_covariance(GaussianLaw{sigma}, Representation::linear(e1), Representation::linear(e2));
  CHECK(toy.schur(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("stacked covariance: Monte Carlo agrees with the analytic path") {
  const auto spec = random_instance(2);
  const auto g = random_rep(3, 2, 6);
  const auto exact = stacked_covariance(spec.tasks[1].law, g, spec.rep_star);
  const auto mc = stacked_covariance(spec.tasks[1].law, g, spec.rep_star, forced(200000, 9));
  CHECK_FALSE(mc.analytic);
  CHECK((mc.sigma - exact.sigma).norm() / exact.sigma.norm() <= 0.02);
  CHECK(min_eig(exact.sigma) >= -1e-9);
  CHECK(min_eig(exact.schur) >= -1e-9);
}

TEST_CASE("mu_x closed-form cases") {
  const auto same = random_instance(4, 6, 1, 2, 3, 0.0, true);
  const auto g = random_rep(5, 2, 6);
  CHECK(mu_x(same, g) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(mu_x(same, same.rep_star) == 0.0);

  auto scaled = random_instance(6, 6, 1, 2, 3, 0.0, true);
  auto& target = std::get<GaussianLaw>(scaled.tasks[0].law).sigma;
  target *= 2.0;
  CHECK(mu_x(scaled, g) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("mu_x is a valid PSD certificate") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto spec = random_instance(100 + seed);
    const auto g = random_rep(200 + seed, 2, 6);
    const double mx = mu_x(spec, g);
    REQUIRE(std::isfinite(mx));
    const Matrix s0 = stacked_covariance(spec.tasks[0].law, g, spec.rep_star).schur;
    for (std::size_t t = 1; t < spec.tasks.size(); ++t) {
      const Matrix st = stacked_covariance(spec.tasks[t].law, g, spec.rep_star).schur;
      CHECK(min_eig(mx * st - s0 + 1e-8 * Matrix::Identity(2, 2)) >= 0.0);
    }
  }
}

TEST_CASE("mu_x_grid is the dictionary maximum") {
  const auto spec = random_instance(7);
  std::vector<Representation> dict{random_rep(1, 2, 6), random_rep(2, 2, 6), random_rep(3, 2, 6)};
  double expected = 0.0;
  for (const auto& g : dict) expected = std::max(expected, mu_x(spec, g));
  CHECK(mu_x_grid(spec, dict) == expected);
}

TEST_CASE("mu_f closed-form cases") {
  std::mt19937_64 eng(71);
  const Matrix f = oracle::gaussian(eng, 3, 2);
  CHECK(mu_f({LinearHead(f), LinearHead(f), LinearHead(f)}) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mu_f({LinearHead(1.7 * f), LinearHead(f)}) == doctest::Approx(1.7 * 1.7).epsilon(1e-10));
  Matrix a(1, 2);
  Matrix b(1, 2);
  a << 0.0, 1.0;
  b << 1.0, 0.0;
  try {
    mu_f({LinearHead(a), LinearHead(b)});
    FAIL("expected RangeViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RangeViolation);
  }
}

TEST_CASE("excess risk closed forms and Monte Carlo agreement") {
  const auto spec = random_instance(8, 5, 2, 2, 2);
  const LinearHead star = spec.tasks[0].head;
  CHECK(excess_risk_population(spec, star, spec.rep_star) <= 1e-14);
  const Matrix& g = *spec.rep_star.linear_map();
  const Matrix sigma_g = g * std::get<GaussianLaw>(spec.tasks[0].law).sigma * g.transpose();
  const double expected = (star.F * sigma_g * star.F.transpose()).trace();
  CHECK(excess_risk_population(spec, LinearHead(2.0 * star.F), spec.rep_star) ==
        doctest::Approx(expected).epsilon(1e-12));

  const auto rep = random_rep(9, 2, 5);
  std::mt19937_64 eng(73);
  const LinearHead head(oracle::gaussian(eng, 2, 2));
  const double exact = excess_risk_population(spec, head, rep);
  CHECK(excess_risk_population(spec, head, rep, forced(200000, 4)) == doctest::Approx(exact).epsilon(0.02));

  std::vector<LinearHead> heads{LinearHead(oracle::gaussian(eng, 2, 2)), LinearHead(oracle::gaussian(eng, 2, 2))};
  const double avg = estimation_error_avg(spec, heads, rep);
  CHECK(estimation_error_avg(spec, heads, rep, forced(200000, 5)) == doctest::Approx(avg).epsilon(0.02));
  CHECK(avg == doctest::Approx(0.5 * (task_risk_population(spec, 1, heads[0], rep) +
                                      task_risk_population(spec, 2, heads[1], rep))));
  std::vector<LinearHead> truth{spec.tasks[1].head, spec.tasks[2].head};
  CHECK(estimation_error_avg(spec, truth, spec.rep_star) <= 1e-14);
}

TEST_CASE("infimal risk is attained by the population least-squares head") {
  const auto spec = random_instance(10, 6, 2, 2, 2);
  const auto g = random_rep(11, 2, 6);
  const auto cov = stacked_covariance(spec.tasks[1].law, g, spec.rep_star);
  const Matrix head = spec.tasks[1].head.F * cov.sigma.bottomLeftCorner(2, 2) * cov.sigma.topLeftCorner(2, 2).inverse();
  CHECK(task_risk_population(spec, 1, LinearHead(head), g) == doctest::Approx(infimal_risk(spec, 1, g)).epsilon(1e-9));
}

TEST_CASE("nu_true cases and the coverage certificate") {
  const auto spec = random_instance(12);
  CHECK_FALSE(nu_true(spec, spec.rep_star).has_value());

  auto twin = random_instance(13, 6, 1, 2, 1);
  twin.tasks[1] = twin.tasks[0];
  CHECK(*nu_true(twin, random_rep(14, 2, 6)) == doctest::Approx(1.0).epsilon(1e-12));

  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = random_instance(300 + seed);
    const auto g = random_rep(400 + seed, 2, 6);
    std::vector<LinearHead> heads;
    for (const auto& task : s.tasks) heads.push_back(task.head);
    const auto nu = nu_true(s, g);
    REQUIRE(nu.has_value());
    CHECK(1.0 / *nu <= mu_x(s, g) * mu_f(heads) * (1.0 + 1e-9));
  }
}

TEST_CASE("nu_hat: equivalent representations are undefined, symmetric instance is near one") {
  auto spec = random_instance(15, 5, 1, 2, 1);
  datagen::SampleRequest req{spec, {200, 200}, 3, std::nullopt};
  const auto data = datagen::sample_tasks(req);
  Matrix m(2, 2);
  m << 2.0, 1.0, -0.5, 1.5;
  CHECK_FALSE(nu_hat(data, Representation::linear(m * *spec.rep_star.linear_map())).has_value());

  spec.tasks[1] = spec.tasks[0];
  datagen::SampleRequest big{spec, {100000, 100000}, 4, std::nullopt};
  const auto value = nu_hat(datagen::sample_tasks(big), random_rep(16, 2, 5));
  REQUIRE(value.has_value());
  CHECK(std::abs(*value - 1.0) <= 0.05);
}

TEST_CASE("decomposition: excess risk splits into the NRLS term and the scaled estimation error") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = random_instance(500 + seed, 6, 2, 2, 4, 0.5);
    datagen::SampleRequest req{spec, std::vector<std::size_t>(5, 40), seed, std::nullopt};
    const auto data = datagen::sample_tasks(req);
    const std::vector<TaskDataset> sources(data.begin() + 1, data.end());
    const auto first = erm::fit_first_stage_linear(sources, 2);
    const auto second = erm::fit_second_stage(data[0], first.rep);
    const auto nu = nu_true(spec, first.rep);
    REQUIRE(nu.has_value());
    const double lhs = excess_risk_population(spec, second.head, first.rep);
    const double rhs = nrls_excess_term(spec, second.head, first.rep) +
                       estimation_error_avg(spec, first.heads, first.rep) / *nu + 1e-9;
    CHECK(lhs <= rhs);
  }
}

TEST_CASE("scaling the labels scales the risks quadratically and leaves nu unchanged") {
  const auto spec = random_instance(17, 6, 2, 2, 3);
  auto scaled = spec;
  for (auto& task : scaled.tasks) task.head.F *= 3.0;
  const auto g = random_rep(18, 2, 6);
  std::mt19937_64 eng(79);
  const LinearHead head(oracle::gaussian(eng, 2, 2));
  std::vector<LinearHead> heads{LinearHead(oracle::gaussian(eng, 2, 2)), LinearHead(oracle::gaussian(eng, 2, 2)),
                                LinearHead(oracle::gaussian(eng, 2, 2))};
  std::vector<LinearHead> heads3;
  for (const auto& h : heads) heads3.emplace_back(3.0 * h.F);
  CHECK(excess_risk_population(scaled, LinearHead(3.0 * head.F), g) ==
        doctest::Approx(9.0 * excess_risk_population(spec, head, g)).epsilon(1e-12));
  CHECK(estimation_error_avg(scaled, heads3, g) == doctest::Approx(9.0 * estimation_error_avg(spec, heads, g)).epsilon(1e-12));
  CHECK(*nu_true(scaled, g) == doctest::Approx(*nu_true(spec, g)).epsilon(1e-12));
}

TEST_CASE("NRLS quantities: well-specified noiseless target has zero noise moments") {
  const auto spec = random_instance(19, 5, 1, 2, 1);
  MonteCarloOptions mc;
  mc.samples = 20000;
  const auto q = nrls_quantities(spec, spec.rep_star, mc);
  CHECK(q.sigma_u_sq <= 1e-20);
  CHECK(q.sigma_v_sq <= 1e-20);
  CHECK(q.h_v == 0.0);
}

TEST_CASE("NRLS quantities: Gaussian kurtosis and the sigma_V chain") {
  datagen::LinearInstanceOptions opts;
  opts.dims = Dims{3, 1, 1};
  opts.num_sources = 1;
  opts.noise_sigma = 0.5;
  const auto spec = datagen::make_linear_instance(opts, 21);
  MonteCarloOptions mc;
  mc.samples = 200000;
  mc.seed = 6;
  const auto g = random_rep(22, 1, 3);
  const auto q = nrls_quantities(spec, g, mc);
  CHECK(q.c_z == doctest::Approx(std::sqrt(3.0)).epsilon(0.02));

  const auto wide = random_instance(23, 6, 2, 3, 1, 0.7);
  const auto gw = random_rep(24, 3, 6);
  const auto qw = nrls_quantities(wide, gw, mc);
  // sigma_V^2 <= C_Z sigma_U^2 r, with three standard errors of Monte Carlo slack on sigma_V^2.
  const double slack = 3.0 * qw.sigma_v_sq * std::sqrt(10.0 / static_cast<double>(mc.samples));
  CHECK(qw.sigma_v_sq <= qw.c_z * qw.sigma_u_sq * 3.0 + slack);
  CHECK(qw.h_v > 0.0);
  CHECK(qw.h_z == qw.c_z);
}

TEST_CASE("NRLS excess term vanishes at the misspecified head") {
  const auto spec = random_instance(25, 6, 2, 2, 1, 0.3);
  const auto g = random_rep(26, 2, 6);
  MonteCarloOptions mc;
  mc.samples = 1000;
  const auto q = nrls_quantities(spec, g, mc);
  CHECK(nrls_excess_term(spec, LinearHead(q.misspecified_head), g) <= 1e-12);
  // Pythagoras: excess risk = NRLS term + infimal risk for any head.
  std::mt19937_64 eng(83);
  const LinearHead head(oracle::gaussian(eng, 2, 2));
  CHECK(excess_risk_population(spec, head, g) ==
        doctest::Approx(nrls_excess_term(spec, head, g) + infimal_risk(spec, 0, g)).epsilon(1e-9));
}

TEST_CASE("hypercontractivity constant") {
  MonteCarloOptions mc;
  mc.samples = 200000;
  mc.seed = 8;
  const std::vector<CovariateLaw> gauss{GaussianLaw{Matrix::Identity(1, 1)}};
  const HypothesisMap linear = [](const Matrix& x) -> Matrix { return x; };
  const HypothesisMap constant = [](const Matrix& x) -> Matrix { return Matrix::Ones(x.rows(), 1); };
  const HypothesisMap zero = [](const Matrix& x) -> Matrix { return Matrix::Zero(x.rows(), 1); };
  const HypothesisMap cubic = [](const Matrix& x) -> Matrix { return x.array().cube().matrix(); };
  CHECK(hypercontractivity_c42(gauss, {linear}, mc).c42 == doctest::Approx(3.0).epsilon(0.05));
  CHECK(hypercontractivity_c42(gauss, {constant}, mc).c42 == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<HypothesisMap> grid{constant, zero, linear, cubic};
  const auto res = hypercontractivity_c42(gauss, grid, mc);
  CHECK(res.skipped == 1);
  double best = 0.0;
  std::size_t arg = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (k == 1) continue;
    const double v = hypercontractivity_c42(gauss, {grid[k]}, mc).c42;
    if (v > best) {
      best = v;
      arg = k;
    }
  }
  CHECK(res.c42 == best);
  CHECK(res.argmax == arg);
  CHECK_THROWS_AS(hypercontractivity_c42(gauss, {zero}, mc), Error);
}

TEST_CASE("diagnose fills every field and marks the analytic path") {
  const auto spec = random_instance(27, 6, 1, 2, 3, 0.2);
  datagen::SampleRequest req{spec, std::vector<std::size_t>(4, 60), 5, std::nullopt};
  const auto data = datagen::sample_tasks(req);
  const std::vector<TaskDataset> sources(data.begin() + 1, data.end());
  const auto first = erm::fit_first_stage_linear(sources, 2);
  const auto second = erm::fit_second_stage(data[0], first.rep);
  MonteCarloOptions mc;
  mc.samples = 5000;
  const auto rep = diagnose(spec, data, first.heads, second.head, first.rep, mc);
  CHECK(rep.analytic);
  CHECK(rep.mu_x.has_value());
  CHECK(rep.mu_f.has_value());
  CHECK(rep.nu_hat.has_value());
  CHECK(rep.excess_risk_target >= 0.0);
  CHECK(std::isfinite(rep.nrls.c_z));
}
