#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtrl/bounds.hpp"
#include "mtrl/diagnostics.hpp"
#include "mtrl/erm.hpp"
#include "mtrl_app/config.hpp"

namespace mtrl::app {

/// OLS slope of log y on log x. Throws InvalidPoints for fewer than three
/// points or any non-positive coordinate.
double slope_fit(const std::vector<std::pair<double, double>>& points);

/// One sampled instance, its two-stage fit and the data it used.
struct Trial {
  PopulationSpec spec;
  std::vector<TaskDataset> data;  // target first
  erm::FirstStageFit first;
  erm::SecondStageFit second;
};

/// Seeds: instance from population.instance_seed (or derived from `seed`),
/// samples and fit from independent streams derived from `seed`.
Trial run_trial(const ExperimentConfig& cfg, std::size_t num_sources, std::size_t n, std::size_t n_prime,
                std::uint64_t seed);

struct SweepRow {
  double axis_value = 0.0;
  std::size_t replicate = 0;
  double excess_risk_target = 0.0;
  double est_error_avg = 0.0;
  std::optional<double> nu_hat;
  std::optional<double> mu_x;
  std::optional<double> mu_f;
  double fit_objective = 0.0;
  double nrls_excess = 0.0;
  std::optional<double> rep_error;  // sine of the largest principal angle, linear fits only
  double wall_time_ms = 0.0;
  std::string error;  // empty on success
};

struct SweepResult {
  SweepAxis axis = SweepAxis::T;
  std::vector<double> grid;
  std::vector<SweepRow> rows;  // sorted by (axis_value, replicate)
  std::map<std::string, std::vector<std::optional<double>>> medians;  // per metric, aligned with grid
  std::map<std::string, std::optional<double>> slopes;  // log-log slope of the medians
  std::size_t failures = 0;
};

/// Metrics aggregated by median and slope-fitted.
const std::vector<std::string>& sweep_metrics();

/// Throws SweepFailed when the grid has fewer than three points, is not
/// strictly increasing, or more than half of the rows fail.
SweepResult run_sweep(const ExperimentConfig& cfg);

/// Every SweepRow field except wall_time_ms, which goes to write_timings_csv,
/// so identical configs give identical bytes.
void write_sweep_csv(const SweepResult& result, std::ostream& out);
void write_timings_csv(const SweepResult& result, std::ostream& out);
nlohmann::json sweep_summary(const ExperimentConfig& cfg, const SweepResult& result);

diagnostics::DiagnosticsReport run_diagnose(const ExperimentConfig& cfg);
bounds::BoundReport run_bounds(const ExperimentConfig& cfg);
nlohmann::json run_mixcheck(const ExperimentConfig& cfg);

}  // namespace mtrl::app
