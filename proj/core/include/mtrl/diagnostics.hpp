#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mtrl/types.hpp"

namespace mtrl::diagnostics {

/// Monte Carlo settings shared by every population quantity. When both
/// representations are linear the second moments are exact and `samples` is
/// ignored unless `force` is set.
struct MonteCarloOptions {
  std::size_t samples = 200000;
  std::uint64_t seed = 0;
  bool force = false;
};

/// sigma = E[[g; g_*][g; g_*]^T] with the g block first; schur is
/// E[g_* g_*^T] - E[g_* g^T] E[g g^T]^+ E[g g_*^T].
struct StackedCovariance {
  Matrix sigma;
  Matrix schur;
  bool analytic = false;
};

StackedCovariance stacked_covariance(const CovariateLaw& law, const Representation& g,
                                     const Representation& g_star, const MonteCarloOptions& mc = {});

/// max_t ||S_t^{+/2} S_0 S_t^{+/2}||_2 over source tasks, S_t the Schur
/// complement of task t. Zero when S_0 = 0; +infinity when range(S_0) is not
/// inside range(S_t) for some t (no finite certificate exists).
double mu_x(const PopulationSpec& spec, const Representation& g, const MonteCarloOptions& mc = {});

/// Grid variant for finite classes: max of mu_x over the dictionary.
double mu_x_grid(const PopulationSpec& spec, const std::vector<Representation>& dictionary,
                 const MonteCarloOptions& mc = {});

/// Head coverage with heads[0] the target and heads[1..T] the sources.
/// Throws RangeViolation when the target Gram leaves the source Gram range.
double mu_f(const std::vector<LinearHead>& heads);

/// E_0 ||F g(X) - F_*^{(0)} g_*(X)||^2 under the target law.
double excess_risk_population(const PopulationSpec& spec, const LinearHead& head, const Representation& g,
                              const MonteCarloOptions& mc = {});

/// Same quantity on source task t (1-based into spec.tasks).
double task_risk_population(const PopulationSpec& spec, std::size_t task, const LinearHead& head,
                            const Representation& g, const MonteCarloOptions& mc = {});

/// (1/T) sum_t E_t ||F_t g(X) - F_*^{(t)} g_*(X)||^2; heads[t-1] belongs to source t.
double estimation_error_avg(const PopulationSpec& spec, const std::vector<LinearHead>& heads,
                            const Representation& g, const MonteCarloOptions& mc = {});

/// inf_F E_t ||F g(X) - F_*^{(t)} g_*(X)||^2 = tr(F_* S_t F_*^T).
double infimal_risk(const PopulationSpec& spec, std::size_t task, const Representation& g,
                    const MonteCarloOptions& mc = {});

inline constexpr double kUndefinedThreshold = 1e-12;

/// Source-averaged infimal risk over target infimal risk; nullopt when the
/// denominator is below kUndefinedThreshold.
std::optional<double> nu_true(const PopulationSpec& spec, const Representation& g,
                              const MonteCarloOptions& mc = {});

/// Plug-in estimate from data[0] (target) and data[1..T] (sources).
std::optional<double> nu_hat(const std::vector<TaskDataset>& data, const Representation& g);

struct NrlsQuantities {
  double sigma_u_sq = 0.0;
  double sigma_v_sq = 0.0;
  double c_z = 0.0;
  double h_z = 0.0;
  double h_v = 0.0;  // zero when sigma_v_sq < 1e-12 r E||Y||^2
  Matrix misspecified_head;  // E[Y Z^T] E[Z Z^T]^+
  Matrix sigma_z;            // E[Z Z^T]
};

/// Noise quantities of the target regression of Y on g(X). Sphere suprema use
/// 1000 random directions plus the coordinate axes of the whitened features,
/// so c_z and h_z are lower bounds on the true suprema.
NrlsQuantities nrls_quantities(const PopulationSpec& spec, const Representation& g,
                               const MonteCarloOptions& mc = {});

/// ||(F - F_hat_*) sqrt(Sigma_Z)||_F^2 for the target task.
double nrls_excess_term(const PopulationSpec& spec, const LinearHead& head, const Representation& g,
                        const MonteCarloOptions& mc = {});

/// A centred hypothesis evaluated on a batch: N x d_x -> N x d_y.
using HypothesisMap = std::function<Matrix(const Matrix&)>;

struct HypercontractivityResult {
  double c42 = 0.0;
  std::size_t argmax = 0;
  std::size_t skipped = 0;  // grid members with E||h||^2 < 1e-14
};

/// max over the grid of E||h||^4 / (E||h||^2)^2 under the equal-weight mixture
/// of `laws`. Throws InvalidArgument if the grid is empty or fully degenerate.
HypercontractivityResult hypercontractivity_c42(const std::vector<CovariateLaw>& laws,
                                                const std::vector<HypothesisMap>& grid,
                                                const MonteCarloOptions& mc = {});

struct DiagnosticsReport {
  std::optional<double> mu_x;
  std::optional<double> mu_f;
  std::optional<double> nu_true;
  std::optional<double> nu_hat;
  double excess_risk_target = 0.0;
  double est_error_avg = 0.0;
  double nrls_excess = 0.0;
  NrlsQuantities nrls;
  bool analytic = false;
};

/// Every diagnostic for one two-stage fit. `source_heads` are the T fitted
/// source heads, `target_head` the second-stage head, `data` the samples the
/// fit used (target first). mu_f is evaluated on the true heads.
DiagnosticsReport diagnose(const PopulationSpec& spec, const std::vector<TaskDataset>& data,
                           const std::vector<LinearHead>& source_heads, const LinearHead& target_head,
                           const Representation& g, const MonteCarloOptions& mc = {});

}  // namespace mtrl::diagnostics
