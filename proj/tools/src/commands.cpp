#include <cmath>

#include "mtrl/datagen.hpp"
#include "mtrl/error.hpp"
#include "mtrl/mixing.hpp"
#include "mtrl/rng.hpp"
#include "mtrl/serialize.hpp"
#include "mtrl/smallball.hpp"
#include "mtrl_app/app.hpp"

namespace mtrl::app {

Trial run_trial(const ExperimentConfig& cfg, std::size_t num_sources, std::size_t n, std::size_t n_prime,
                std::uint64_t seed) {
  datagen::LinearInstanceOptions opts = cfg.population.instance;
  opts.num_sources = num_sources;
  Trial trial;
  trial.spec = datagen::make_linear_instance(opts, cfg.population.instance_seed.value_or(derive_seed(seed, 0)));

  datagen::SampleRequest req;
  req.spec = trial.spec;
  req.per_task_n.assign(num_sources + 1, n);
  req.per_task_n[0] = n_prime;
  req.seed = derive_seed(seed, 1);
  req.burn_in_steps = cfg.samples.burn_in;
  trial.data = datagen::sample_tasks(req);

  const std::vector<TaskDataset> sources(trial.data.begin() + 1, trial.data.end());
  if (cfg.fit.cls == FitClass::Linear) {
    erm::LinearFitOptions fit = cfg.fit.linear;
    fit.seed = derive_seed(seed, 2);
    trial.first = erm::fit_first_stage_linear(sources, opts.dims.r, fit);
  } else {
    erm::ParametricFitOptions fit = cfg.fit.parametric;
    fit.r = opts.dims.r;
    fit.seed = derive_seed(seed, 2);
    trial.first = erm::fit_first_stage_parametric(sources, fit);
  }
  trial.second = erm::fit_second_stage(trial.data.front(), trial.first.rep);
  return trial;
}

diagnostics::DiagnosticsReport run_diagnose(const ExperimentConfig& cfg) {
  const Trial trial = run_trial(cfg, cfg.population.instance.num_sources, cfg.samples.n, cfg.samples.n_prime, cfg.seed);
  diagnostics::MonteCarloOptions mc;
  mc.samples = cfg.diagnostics.mc_samples;
  mc.seed = derive_seed(cfg.seed, 3);
  return diagnostics::diagnose(trial.spec, trial.data, trial.first.heads, trial.second.head, trial.first.rep, mc);
}

bounds::BoundReport run_bounds(const ExperimentConfig& cfg) {
  return bounds::transfer_risk_bound(cfg.bounds.config, cfg.bounds.inputs);
}

nlohmann::json run_mixcheck(const ExperimentConfig& cfg) {
  const auto& m = cfg.mixcheck;
  require(m.markov_p || m.lds_a, ErrorCode::InvalidArgument, "mixcheck: configure markov_P and/or lds_A");
  nlohmann::json out = nlohmann::json::object();
  if (m.markov_p) {
    const auto profile = mixing::phi_markov(*m.markov_p, m.max_lag);
    const auto dep = mixing::dependency_matrix_bound(profile, m.max_lag + 1);
    out["markov"] = to_json(profile);
    out["markov"]["dependency_norm"] = dep.spectral_norm;
    out["markov"]["dependency_row_sum_bound"] = dep.row_sum_bound;
  }
  std::size_t stride = 1;
  if (m.lds_a) {
    const auto profile = mixing::geometric_profile_from_lds(*m.lds_a, m.mc_samples, derive_seed(cfg.seed, 10));
    out["lds"] = to_json(profile);
    if (m.block_m) {
      stride = mixing::select_block_length(profile, *m.block_m, m.delta);
      out["lds"]["block_length"] = stride;
      out["lds"]["block_m"] = *m.block_m;
      out["lds"]["delta"] = m.delta;
    }
  }
  if (m.smallball) {
    // Gaussian-square fixture: psi(x) = x^2 with C = 3 (Gaussian kurtosis).
    const smallball::Psi psi = [](const Matrix& x) -> Vector { return x.col(0).array().square(); };
    smallball::TailCheckOptions opts;
    opts.c = 3.0;
    opts.m = m.smallball_m;
    opts.replicates = m.smallball_replicates;
    opts.seed = derive_seed(cfg.seed, 11);
    opts.threads = cfg.threads;
    auto summarize = [](const smallball::TailCheckResult& r) {
      return nlohmann::json{{"empirical_freq", r.empirical_freq}, {"bound", r.bound},
                            {"std_error", r.std_error},           {"within_slack", r.within_slack},
                            {"dependency_norm", r.dependency_norm}};
    };
    out["smallball_iid"] = summarize(smallball::lower_isometry_tail_check(GaussianLaw{Matrix::Identity(1, 1)}, psi, opts));
    if (m.lds_a && m.lds_a->rows() == 1) {
      opts.blocked = smallball::BlockedMode{
          mixing::geometric_profile_from_lds(*m.lds_a, m.mc_samples, derive_seed(cfg.seed, 10)), stride};
      out["smallball_blocked"] = summarize(smallball::lower_isometry_tail_check(LdsLaw{*m.lds_a}, psi, opts));
    }
  }
  return out;
}

}  // namespace mtrl::app
