#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mtrl/mixing.hpp"
#include "mtrl/types.hpp"

namespace mtrl::bounds {

// All bounds below are "up to constant": the unspecified universal constants
// are set to 1 except the martingale constant c, which is configurable.

struct FiniteClass {
  double log_card = 0.0;  // log |G|
};

struct ParametricClass {
  double d_theta = 1.0;
  double b_theta = 1.0;
  double l_theta = 1.0;
};

using ClassComplexity = std::variant<FiniteClass, ParametricClass>;

struct MixingMode {
  mixing::MixingProfile profile;
  std::size_t k = 1;
};

struct BoundConfig {
  Dims dims;
  double T = 1.0;
  double N = 1.0;
  double N_prime = 1.0;
  double sigma_w = 1.0;
  double b_f = 1.0;
  double b_g = 1.0;
  ClassComplexity class_complexity = FiniteClass{};
  double delta = 0.05;
  std::optional<double> gamma;  // defaults to sigma_w / (N T)
  std::optional<double> tau;    // defaults to gamma
  std::optional<MixingMode> mixing;
  double c_universal = 1.0;

  double resolution() const;
  double localization() const;
  /// Throws InvalidArgument on non-positive counts, scales or delta outside (0, 1].
  /// delta = 1 switches the deviation terms off.
  void validate() const;
};

/// d_theta log(1 + 2 B_theta L_theta / gamma).
double covering_parametric(double d_theta, double b_theta, double l_theta, double gamma);

/// log N(G, gamma): log_card for finite classes, covering_parametric otherwise.
double covering_class(const ClassComplexity& cls, double gamma);

/// T d_y r log(1 + 4 B_F B_G / gamma) + log(1 + 2 B_F B_G / gamma) + log N(G, gamma / (4 B_F)).
double covering_star_hull(const BoundConfig& cfg, double gamma);

struct LogIntegral {
  double bound = 0.0;     // sqrt(log(e (1 + C)))
  double integral = 0.0;  // int_0^1 sqrt(log(1 + C / x)) dx by tanh-sinh quadrature
};

LogIntegral log_integral_bound(double c);

struct MartingaleTerms {
  double head = 0.0;       // (d_y r / N) log(e + B_F B_G N T / sigma)
  double cls = 0.0;        // class term / (N T)
  double deviation = 0.0;  // log(1 / delta) / (N T)
  double total = 0.0;      // c sigma^2 (head + cls + deviation)
};

/// Class term before the 1/(NT) factor: d_theta log(e + B_F B_theta L_theta N T / sigma) or log |G|.
double class_term(const BoundConfig& cfg);

MartingaleTerms martingale_terms(const BoundConfig& cfg);
double martingale_complexity_bound(const BoundConfig& cfg);

/// Task-averaged estimation error bound; equals the martingale complexity bound.
double est_error_bound(const BoundConfig& cfg);

/// Problem constants measured by the diagnostics module.
struct TransferInputs {
  double mu_x = 1.0;
  double mu_f = 1.0;
  double c_z = 1.0;
  double h_z = 1.0;
  double h_v = 1.0;
  double c42_target = 1.0;
  double c42_sources = 1.0;
};

struct BurnIn {
  std::string name;
  double required = 0.0;
  double actual = 0.0;
  bool satisfied = false;
};

struct BoundReport {
  double covering_log = 0.0;
  double martingale_bound = 0.0;
  double est_error_bound = 0.0;
  double nrls_bound = 0.0;
  double transfer_bound = 0.0;
  double mu_x = 0.0;
  double mu_f = 0.0;
  double gamma = 0.0;
  double tau = 0.0;
  double c_universal = 1.0;
  bool up_to_constant = true;
  bool mixing = false;
  std::size_t block_length = 1;
  double phi_capital = 1.0;
  std::vector<BurnIn> burn_ins;
};

/// nrls_bound = sigma^2 C_Z d_y r log(1/delta) / N', transfer_bound =
/// nrls_bound + mu_x mu_f est_error_bound. Mixing mode changes only the
/// burn-in table: target counts become N'/k, the source count N/Phi, and the
/// condition (N'/k) phi(k) <= delta is added.
BoundReport transfer_risk_bound(const BoundConfig& cfg, const TransferInputs& in);

/// Burn-in table rendered as CSV with header name,required,actual,satisfied.
std::string burn_in_csv(const BoundReport& report);

struct SnmConfig {
  std::size_t T = 5;
  std::size_t N = 50;
  std::size_t d = 3;
  double sigma = 1.0;
  double delta = 0.05;
  std::size_t replicates = 2000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct SnmResult {
  double violation_rate = 0.0;
  double delta = 0.0;
  double std_error = 0.0;  // binomial standard error at delta
  bool within_slack = false;  // violation_rate <= delta + 3 std_error
  double mean_lhs = 0.0;
  double mean_rhs = 0.0;
};

/// Monte Carlo coverage of the multi-task self-normalized bound with Gaussian
/// covariates and N(0, sigma^2 I_d) noise, regulariser Sigma = I:
/// sum_t ||(I + X_t^T X_t)^{-1/2} X_t^T W_t||_F^2
///   <= sum_t d sigma^2 log det(I + X_t^T X_t) + 2 sigma^2 log(1/delta).
SnmResult snm_bound_check(const SnmConfig& cfg);

/// One replicate's (lhs, rhs) for given data; exposed for tests.
std::pair<double, double> snm_sides(const std::vector<Matrix>& xs, const std::vector<Matrix>& ws, double sigma,
                                    double delta);

}  // namespace mtrl::bounds
