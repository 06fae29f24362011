#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "mtrl/error.hpp"
#include "mtrl/parallel.hpp"
#include "mtrl/rng.hpp"
#include "mtrl_app/app.hpp"

namespace mtrl::app {

double slope_fit(const std::vector<std::pair<double, double>>& points) {
  require(points.size() >= 3, ErrorCode::InvalidPoints, "slope_fit: need at least three points");
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : points) {
    require(x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y), ErrorCode::InvalidPoints,
            "slope_fit: coordinates must be positive and finite");
    mx += std::log(x);
    my += std::log(y);
  }
  const double n = static_cast<double>(points.size());
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx;
    sxy += dx * (std::log(y) - my);
    sxx += dx * dx;
  }
  require(sxx > 0.0, ErrorCode::InvalidPoints, "slope_fit: x values must not all coincide");
  return sxy / sxx;
}

const std::vector<std::string>& sweep_metrics() {
  static const std::vector<std::string> names{"excess_risk_target", "est_error_avg", "nrls_excess", "fit_objective",
                                              "rep_error", "nu_hat", "mu_x", "mu_f"};
  return names;
}

namespace {

std::optional<double> metric(const SweepRow& row, const std::string& name) {
  if (name == "excess_risk_target") return row.excess_risk_target;
  if (name == "est_error_avg") return row.est_error_avg;
  if (name == "nrls_excess") return row.nrls_excess;
  if (name == "fit_objective") return row.fit_objective;
  if (name == "rep_error") return row.rep_error;
  if (name == "nu_hat") return row.nu_hat;
  if (name == "mu_x") return row.mu_x;
  if (name == "mu_f") return row.mu_f;
  return std::nullopt;
}

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

SweepRow evaluate(const ExperimentConfig& cfg, double axis_value, std::size_t replicate) {
  SweepRow row;
  row.axis_value = axis_value;
  row.replicate = replicate;
  const auto start = std::chrono::steady_clock::now();
  try {
    std::size_t t = cfg.population.instance.num_sources;
    std::size_t n = cfg.samples.n;
    std::size_t n_prime = cfg.samples.n_prime;
    const auto v = static_cast<std::size_t>(axis_value);
    switch (cfg.sweep.axis) {
      case SweepAxis::T: t = v; break;
      case SweepAxis::N: n = v; break;
      case SweepAxis::NPrime: n_prime = v; break;
    }
    const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, v), replicate);
    const Trial trial = run_trial(cfg, t, n, n_prime, seed);
    diagnostics::MonteCarloOptions mc;
    mc.samples = cfg.diagnostics.mc_samples;
    mc.seed = derive_seed(seed, 3);
    const auto& g = trial.first.rep;
    row.fit_objective = trial.first.objective;
    row.excess_risk_target = diagnostics::excess_risk_population(trial.spec, trial.second.head, g, mc);
    row.est_error_avg = diagnostics::estimation_error_avg(trial.spec, trial.first.heads, g, mc);
    row.nrls_excess = diagnostics::nrls_excess_term(trial.spec, trial.second.head, g, mc);
    row.nu_hat = diagnostics::nu_hat(trial.data, g);
    const double mx = diagnostics::mu_x(trial.spec, g, mc);
    if (std::isfinite(mx)) row.mu_x = mx;
    std::vector<LinearHead> heads;
    for (const auto& task : trial.spec.tasks) heads.push_back(task.head);
    try {
      row.mu_f = diagnostics::mu_f(heads);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RangeViolation) throw;
    }
    if (g.is_linear() && trial.spec.rep_star.is_linear()) {
      row.rep_error = max_principal_angle_sin(*g.linear_map(), *trial.spec.rep_star.linear_map());
    }
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string csv_escape(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg) {
  const auto& grid = cfg.sweep.grid;
  require(grid.size() >= 3, ErrorCode::SweepFailed, "sweep: grid needs at least three points for a slope");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    require(grid[i] > grid[i - 1], ErrorCode::SweepFailed, "sweep: grid must be strictly increasing");
  }
  SweepResult result;
  result.axis = cfg.sweep.axis;
  for (auto v : grid) result.grid.push_back(static_cast<double>(v));
  const std::size_t reps = cfg.sweep.replicates;
  result.rows.resize(grid.size() * reps);
  parallel_for(result.rows.size(), cfg.threads, [&](std::size_t idx) {
    result.rows[idx] = evaluate(cfg, result.grid[idx / reps], idx % reps);
  });
  for (const auto& row : result.rows) result.failures += row.error.empty() ? 0 : 1;
  if (2 * result.failures > result.rows.size()) {
    const auto first = std::find_if(result.rows.begin(), result.rows.end(),
                                    [](const SweepRow& r) { return !r.error.empty(); });
    fail(ErrorCode::SweepFailed, "sweep: more than half of the rows failed; first error: " + first->error);
  }

  for (const auto& name : sweep_metrics()) {
    std::vector<std::optional<double>> meds;
    std::vector<std::pair<double, double>> points;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      std::vector<double> values;
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& row = result.rows[gi * reps + r];
        if (!row.error.empty()) continue;
        if (const auto v = metric(row, name); v && std::isfinite(*v)) values.push_back(*v);
      }
      meds.push_back(median(std::move(values)));
      if (meds.back() && *meds.back() > 0.0) points.emplace_back(result.grid[gi], *meds.back());
    }
    result.slopes[name] = points.size() == grid.size() ? std::optional<double>(slope_fit(points)) : std::nullopt;
    result.medians[name] = std::move(meds);
  }
  return result;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  out << "axis_value,replicate,excess_risk_target,est_error_avg,nu_hat,mu_x,mu_f,fit_objective,nrls_excess,"
         "rep_error,error\n";
  for (const auto& r : result.rows) {
    out << fmt(r.axis_value) << ',' << r.replicate << ',';
    if (r.error.empty()) {
      out << fmt(r.excess_risk_target) << ',' << fmt(r.est_error_avg) << ',' << fmt(r.nu_hat) << ','
          << fmt(r.mu_x) << ',' << fmt(r.mu_f) << ',' << fmt(r.fit_objective) << ',' << fmt(r.nrls_excess) << ','
          << fmt(r.rep_error) << ",\n";
    } else {
      out << ",,,,,,,," << csv_escape(r.error) << '\n';
    }
  }
}

void write_timings_csv(const SweepResult& result, std::ostream& out) {
  out << "axis_value,replicate,wall_time_ms\n";
  for (const auto& r : result.rows) out << fmt(r.axis_value) << ',' << r.replicate << ',' << fmt(r.wall_time_ms) << '\n';
}

nlohmann::json sweep_summary(const ExperimentConfig& cfg, const SweepResult& result) {
  nlohmann::json slopes = nlohmann::json::object();
  nlohmann::json medians = nlohmann::json::object();
  for (const auto& [name, slope] : result.slopes) slopes[name] = slope ? nlohmann::json(*slope) : nlohmann::json(nullptr);
  for (const auto& [name, meds] : result.medians) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : meds) arr.push_back(m ? nlohmann::json(*m) : nlohmann::json(nullptr));
    medians[name] = std::move(arr);
  }
  const std::string hash = config_hash(cfg.source);
  nlohmann::json run_key{{"config_hash", hash}, {"seed", cfg.seed}};
  return {{"config_hash", hash},
          {"run_id", config_hash(run_key).substr(0, 12)},
          {"axis", to_string(result.axis)},
          {"grid", result.grid},
          {"replicates", cfg.sweep.replicates},
          {"failures", result.failures},
          {"slopes", std::move(slopes)},
          {"medians", std::move(medians)}};
}

}  // namespace mtrl::app
