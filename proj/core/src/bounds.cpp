#include "mtrl/bounds.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "mtrl/error.hpp"
#include "mtrl/parallel.hpp"
#include "mtrl/rng.hpp"

namespace mtrl::bounds {

namespace {

constexpr double kE = 2.718281828459045;

double log_e_plus(double x) { return std::log(kE + x); }

double sample_scale(const BoundConfig& cfg) { return cfg.b_f * cfg.b_g * cfg.N * cfg.T / cfg.sigma_w; }

}  // namespace

double BoundConfig::resolution() const { return gamma.value_or(sigma_w / (N * T)); }

double BoundConfig::localization() const { return tau.value_or(resolution()); }

void BoundConfig::validate() const {
  dims.validate();
  require(T >= 1.0 && N >= 1.0 && N_prime >= 1.0, ErrorCode::InvalidArgument, "bounds: T, N, N' must be >= 1");
  require(sigma_w > 0.0 && b_f > 0.0 && b_g > 0.0, ErrorCode::InvalidArgument,
          "bounds: sigma_w, B_F, B_G must be positive");
  require(delta > 0.0 && delta <= 1.0, ErrorCode::InvalidArgument, "bounds: delta must lie in (0, 1]");
  require(c_universal > 0.0, ErrorCode::InvalidArgument, "bounds: c_universal must be positive");
  require(resolution() > 0.0 && localization() > 0.0, ErrorCode::InvalidArgument,
          "bounds: gamma and tau must be positive");
  if (const auto* p = std::get_if<ParametricClass>(&class_complexity)) {
    require(p->d_theta > 0.0 && p->b_theta > 0.0 && p->l_theta > 0.0, ErrorCode::InvalidArgument,
            "bounds: parametric class constants must be positive");
  } else {
    require(std::get<FiniteClass>(class_complexity).log_card >= 0.0, ErrorCode::InvalidArgument,
            "bounds: log |G| must be >= 0");
  }
  if (mixing) require(mixing->k >= 1, ErrorCode::InvalidArgument, "bounds: block length k must be >= 1");
}

double covering_parametric(double d_theta, double b_theta, double l_theta, double gamma) {
  require(d_theta > 0.0 && b_theta > 0.0 && l_theta > 0.0 && gamma > 0.0, ErrorCode::InvalidArgument,
          "covering_parametric: inputs must be positive");
  return d_theta * std::log1p(2.0 * b_theta * l_theta / gamma);
}

double covering_class(const ClassComplexity& cls, double gamma) {
  if (const auto* p = std::get_if<ParametricClass>(&cls)) {
    return covering_parametric(p->d_theta, p->b_theta, p->l_theta, gamma);
  }
  return std::get<FiniteClass>(cls).log_card;
}

double covering_star_hull(const BoundConfig& cfg, double gamma) {
  cfg.validate();
  require(gamma > 0.0, ErrorCode::InvalidArgument, "covering_star_hull: gamma must be positive");
  const double bfg = cfg.b_f * cfg.b_g;
  const double heads = cfg.T * cfg.dims.d_y * cfg.dims.r * std::log1p(4.0 * bfg / gamma);
  return heads + std::log1p(2.0 * bfg / gamma) + covering_class(cfg.class_complexity, gamma / (4.0 * cfg.b_f));
}

LogIntegral log_integral_bound(double c) {
  require(c >= 0.0 && std::isfinite(c), ErrorCode::InvalidArgument, "log_integral_bound: C must be finite and >= 0");
  LogIntegral out;
  out.bound = std::sqrt(1.0 + std::log1p(c));
  if (c > 0.0) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    out.integral = integrator.integrate([c](double x) { return std::sqrt(std::log1p(c / x)); }, 0.0, 1.0);
  }
  return out;
}

double class_term(const BoundConfig& cfg) {
  if (const auto* p = std::get_if<ParametricClass>(&cfg.class_complexity)) {
    return p->d_theta * log_e_plus(cfg.b_f * p->b_theta * p->l_theta * cfg.N * cfg.T / cfg.sigma_w);
  }
  return std::get<FiniteClass>(cfg.class_complexity).log_card;
}

MartingaleTerms martingale_terms(const BoundConfig& cfg) {
  cfg.validate();
  MartingaleTerms m;
  const double nt = cfg.N * cfg.T;
  m.head = cfg.dims.d_y * cfg.dims.r / cfg.N * log_e_plus(sample_scale(cfg));
  m.cls = class_term(cfg) / nt;
  m.deviation = std::log(1.0 / cfg.delta) / nt;
  m.total = cfg.c_universal * cfg.sigma_w * cfg.sigma_w * (m.head + m.cls + m.deviation);
  return m;
}

double martingale_complexity_bound(const BoundConfig& cfg) { return martingale_terms(cfg).total; }

double est_error_bound(const BoundConfig& cfg) { return martingale_complexity_bound(cfg); }

BoundReport transfer_risk_bound(const BoundConfig& cfg, const TransferInputs& in) {
  cfg.validate();
  require(in.mu_x >= 0.0 && in.mu_f >= 0.0 && in.c_z >= 0.0 && in.h_z >= 0.0 && in.h_v >= 0.0 &&
              in.c42_target >= 0.0 && in.c42_sources >= 0.0,
          ErrorCode::InvalidArgument, "transfer_risk_bound: problem constants must be >= 0");
  BoundReport rep;
  const double log_inv_delta = std::log(1.0 / cfg.delta);
  const double sigma2 = cfg.sigma_w * cfg.sigma_w;
  rep.gamma = cfg.resolution();
  rep.tau = cfg.localization();
  rep.c_universal = cfg.c_universal;
  rep.mu_x = in.mu_x;
  rep.mu_f = in.mu_f;
  rep.covering_log = covering_star_hull(cfg, rep.gamma);
  rep.martingale_bound = martingale_complexity_bound(cfg);
  rep.est_error_bound = est_error_bound(cfg);
  rep.nrls_bound = sigma2 * in.c_z * cfg.dims.d_y * cfg.dims.r * log_inv_delta / cfg.N_prime;
  rep.transfer_bound = rep.nrls_bound + in.mu_x * in.mu_f * rep.est_error_bound;

  double k = 1.0;
  double phi_cap = 1.0;
  if (cfg.mixing) {
    rep.mixing = true;
    rep.block_length = cfg.mixing->k;
    k = static_cast<double>(cfg.mixing->k);
    phi_cap = mixing::phi_capital(cfg.mixing->profile);
  }
  rep.phi_capital = phi_cap;
  const double target_blocks = cfg.N_prime / k;
  const double dr = static_cast<double>(cfg.dims.d_y * cfg.dims.r);

  auto add = [&rep](std::string name, double required, double actual, bool satisfied) {
    rep.burn_ins.push_back({std::move(name), required, actual, satisfied});
  };
  const double moment_req = in.c_z * std::sqrt(in.c42_target) * cfg.dims.r + in.h_z * in.h_z * log_inv_delta;
  add("target_moment", moment_req, target_blocks, target_blocks >= moment_req);
  const double psi_req = in.h_v * in.h_v * std::pow(log_inv_delta / std::log(std::max(cfg.N_prime, kE)), 8.0);
  add("target_psi1", psi_req, target_blocks, target_blocks >= psi_req);
  if (cfg.mixing) {
    const double leak = target_blocks * cfg.mixing->profile.phi_at(cfg.mixing->k);
    add("target_mixing", cfg.delta, leak, leak <= cfg.delta);
  }
  const double source_req =
      in.c42_sources * (dr * log_e_plus(sample_scale(cfg)) + (class_term(cfg) + log_inv_delta) / cfg.T);
  const double source_actual = cfg.N / std::max(phi_cap, 1e-300);
  add("source", source_req, source_actual, source_actual >= source_req);
  return rep;
}

std::string burn_in_csv(const BoundReport& report) {
  std::ostringstream out;
  out << std::setprecision(17) << "name,required,actual,satisfied\n";
  for (const auto& b : report.burn_ins) {
    out << b.name << ',' << b.required << ',' << b.actual << ',' << (b.satisfied ? "true" : "false") << '\n';
  }
  return out.str();
}

std::pair<double, double> snm_sides(const std::vector<Matrix>& xs, const std::vector<Matrix>& ws, double sigma,
                                    double delta) {
  require(xs.size() == ws.size(), ErrorCode::InvalidArgument, "snm_sides: one noise matrix per task");
  require(sigma > 0.0 && delta > 0.0 && delta <= 1.0, ErrorCode::InvalidArgument,
          "snm_sides: sigma > 0 and delta in (0, 1] required");
  double lhs = 0.0;
  double rhs = 2.0 * sigma * sigma * std::log(1.0 / delta);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const Matrix& x = xs[t];
    require(ws[t].rows() == x.rows(), ErrorCode::InvalidArgument, "snm_sides: row mismatch");
    const Eigen::Index d = x.cols();
    const Matrix reg = Matrix::Identity(d, d) + x.transpose() * x;
    const Eigen::LLT<Matrix> llt(reg);
    // ||reg^{-1/2} X^T W||_F^2 = tr(W^T X reg^{-1} X^T W)
    const Matrix xtw = x.transpose() * ws[t];
    lhs += (xtw.transpose() * llt.solve(xtw)).trace();
    rhs += static_cast<double>(ws[t].cols()) * sigma * sigma * log_det_spd(reg);
  }
  return {lhs, rhs};
}

SnmResult snm_bound_check(const SnmConfig& cfg) {
  require(cfg.T >= 1 && cfg.d >= 1 && cfg.replicates >= 1, ErrorCode::InvalidArgument,
          "snm_bound_check: T, d, replicates must be >= 1");
  require(cfg.delta > 0.0 && cfg.delta < 1.0 && cfg.sigma > 0.0, ErrorCode::InvalidArgument,
          "snm_bound_check: sigma > 0 and delta in (0, 1) required");
  std::vector<double> lhs(cfg.replicates);
  std::vector<double> rhs(cfg.replicates);
  const auto n = static_cast<Eigen::Index>(cfg.N);
  const auto d = static_cast<Eigen::Index>(cfg.d);
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t rep) {
    Rng rng(derive_seed(cfg.seed, rep));
    std::vector<Matrix> xs;
    std::vector<Matrix> ws;
    for (std::size_t t = 0; t < cfg.T; ++t) {
      xs.push_back(rng.normal_matrix(n, d));
      ws.push_back(cfg.sigma * rng.normal_matrix(n, d));
    }
    std::tie(lhs[rep], rhs[rep]) = snm_sides(xs, ws, cfg.sigma, cfg.delta);
  });
  SnmResult out;
  out.delta = cfg.delta;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < cfg.replicates; ++i) {
    if (lhs[i] > rhs[i]) ++violations;
    out.mean_lhs += lhs[i];
    out.mean_rhs += rhs[i];
  }
  const double reps = static_cast<double>(cfg.replicates);
  out.mean_lhs /= reps;
  out.mean_rhs /= reps;
  out.violation_rate = static_cast<double>(violations) / reps;
  out.std_error = std::sqrt(cfg.delta * (1.0 - cfg.delta) / reps);
  out.within_slack = out.violation_rate <= cfg.delta + 3.0 * out.std_error;
  return out;
}

}  // namespace mtrl::bounds
