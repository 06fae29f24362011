#include "mtrl_app/config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>

#include "mtrl/error.hpp"

namespace mtrl::app {

using nlohmann::json;

const char* to_string(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::T: return "T";
    case SweepAxis::N: return "N";
    case SweepAxis::NPrime: return "N_prime";
  }
  return "?";
}

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  fail(ErrorCode::InvalidArgument, "config: " + where + ": " + what);
}

// Rejects any key of `obj` outside `allowed`.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(where, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!keys.count(item.key())) bad(where, "unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad(where + "." + key, "wrong type");
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& out, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  T value{};
  read(obj, key, value, where);
  out = value;
}

Matrix read_matrix(const json& rows, const std::string& where) {
  if (!rows.is_array() || rows.empty() || !rows.front().is_array()) bad(where, "expected a non-empty 2-D array");
  const auto cols = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != cols) bad(where, "ragged matrix");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!rows[i][j].is_number()) bad(where, "non-numeric entry");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
    }
  }
  return m;
}

void parse_population(const json& j, PopulationConfig& p) {
  const std::string w = "population";
  check_keys(j, w, {"d_x", "d_y", "r", "num_sources", "noise_sigma", "covariates", "lds_rho", "spd_min_eig",
                    "spd_max_eig", "identical_covariates", "head_scale", "instance_seed"});
  auto& o = p.instance;
  read(j, "d_x", o.dims.d_x, w);
  read(j, "d_y", o.dims.d_y, w);
  read(j, "r", o.dims.r, w);
  read(j, "num_sources", o.num_sources, w);
  read(j, "noise_sigma", o.noise_sigma, w);
  std::string cov = "identity";
  read(j, "covariates", cov, w);
  if (cov == "identity") o.covariates = datagen::CovariateFamily::Identity;
  else if (cov == "random_spd") o.covariates = datagen::CovariateFamily::RandomSpd;
  else if (cov == "lds") o.covariates = datagen::CovariateFamily::Lds;
  else bad(w + ".covariates", "expected identity, random_spd or lds");
  read(j, "lds_rho", o.lds_rho, w);
  read(j, "spd_min_eig", o.spd_min_eig, w);
  read(j, "spd_max_eig", o.spd_max_eig, w);
  read(j, "identical_covariates", o.identical_covariates, w);
  read(j, "head_scale", o.head_scale, w);
  read_opt(j, "instance_seed", p.instance_seed, w);
  try {
    o.dims.validate();
  } catch (const Error& e) {
    bad(w, e.what());
  }
  if (o.num_sources < 1) bad(w + ".num_sources", "must be >= 1");
  if (o.noise_sigma < 0.0) bad(w + ".noise_sigma", "must be >= 0");
  if (!(o.lds_rho >= 0.0 && o.lds_rho < 1.0)) bad(w + ".lds_rho", "must lie in [0, 1)");
  if (!(o.spd_min_eig > 0.0 && o.spd_max_eig >= o.spd_min_eig)) bad(w, "need 0 < spd_min_eig <= spd_max_eig");
}

void parse_samples(const json& j, SampleConfig& s) {
  const std::string w = "samples";
  check_keys(j, w, {"n", "n_prime", "burn_in"});
  read(j, "n", s.n, w);
  read(j, "n_prime", s.n_prime, w);
  read_opt(j, "burn_in", s.burn_in, w);
  if (s.n < 1 || s.n_prime < 1) bad(w, "n and n_prime must be >= 1");
}

void parse_fit(const json& j, FitConfig& f) {
  const std::string w = "fit";
  check_keys(j, w, {"class", "max_iters", "tol", "restarts", "lr", "init_scale"});
  std::string cls = "linear";
  read(j, "class", cls, w);
  if (cls == "linear") f.cls = FitClass::Linear;
  else if (cls == "tanh") f.cls = FitClass::Tanh;
  else bad(w + ".class", "expected linear or tanh");
  int max_iters = f.cls == FitClass::Linear ? f.linear.max_iters : f.parametric.max_iters;
  double tol = f.cls == FitClass::Linear ? f.linear.tol : f.parametric.tol;
  int restarts = f.linear.restarts;
  read(j, "max_iters", max_iters, w);
  read(j, "tol", tol, w);
  read(j, "restarts", restarts, w);
  read(j, "lr", f.parametric.lr, w);
  read(j, "init_scale", f.parametric.init_scale, w);
  if (max_iters < 1 || restarts < 1 || !(tol >= 0.0)) bad(w, "max_iters, restarts >= 1 and tol >= 0 required");
  if (f.cls == FitClass::Linear) {
    f.linear.max_iters = max_iters;
    f.linear.tol = tol;
  } else {
    f.parametric.max_iters = max_iters;
    f.parametric.tol = tol;
  }
  f.linear.restarts = restarts;
  f.parametric.restarts = restarts;
}

void parse_sweep(const json& j, SweepConfig& s) {
  const std::string w = "sweep";
  check_keys(j, w, {"axis", "grid", "replicates"});
  std::string axis = "T";
  read(j, "axis", axis, w);
  if (axis == "T") s.axis = SweepAxis::T;
  else if (axis == "N") s.axis = SweepAxis::N;
  else if (axis == "N_prime") s.axis = SweepAxis::NPrime;
  else bad(w + ".axis", "expected T, N or N_prime");
  read(j, "grid", s.grid, w);
  read(j, "replicates", s.replicates, w);
  if (s.replicates < 1) bad(w + ".replicates", "must be >= 1");
  for (auto v : s.grid) {
    if (v < 1) bad(w + ".grid", "values must be >= 1");
  }
}

void parse_bounds(const json& j, BoundsSection& b, const ExperimentConfig& cfg) {
  const std::string w = "bounds";
  check_keys(j, w, {"d_y", "r", "T", "N", "N_prime", "sigma_w", "b_f", "b_g", "class", "delta", "gamma", "tau",
                    "c_universal", "mixing", "inputs"});
  auto& c = b.config;
  const auto& inst = cfg.population.instance;
  c.dims = inst.dims;
  c.T = static_cast<double>(inst.num_sources);
  c.N = static_cast<double>(cfg.samples.n);
  c.N_prime = static_cast<double>(cfg.samples.n_prime);
  c.sigma_w = inst.noise_sigma > 0.0 ? inst.noise_sigma : 1.0;
  read(j, "d_y", c.dims.d_y, w);
  read(j, "r", c.dims.r, w);
  read(j, "T", c.T, w);
  read(j, "N", c.N, w);
  read(j, "N_prime", c.N_prime, w);
  read(j, "sigma_w", c.sigma_w, w);
  read(j, "b_f", c.b_f, w);
  read(j, "b_g", c.b_g, w);
  read(j, "delta", c.delta, w);
  read_opt(j, "gamma", c.gamma, w);
  read_opt(j, "tau", c.tau, w);
  read(j, "c_universal", c.c_universal, w);
  if (j.contains("class")) {
    const auto& cj = j.at("class");
    check_keys(cj, w + ".class", {"kind", "log_card", "d_theta", "b_theta", "l_theta"});
    std::string kind = "finite";
    read(cj, "kind", kind, w + ".class");
    if (kind == "finite") {
      bounds::FiniteClass fc;
      read(cj, "log_card", fc.log_card, w + ".class");
      c.class_complexity = fc;
    } else if (kind == "parametric") {
      bounds::ParametricClass pc;
      read(cj, "d_theta", pc.d_theta, w + ".class");
      read(cj, "b_theta", pc.b_theta, w + ".class");
      read(cj, "l_theta", pc.l_theta, w + ".class");
      c.class_complexity = pc;
    } else {
      bad(w + ".class.kind", "expected finite or parametric");
    }
  }
  if (j.contains("mixing") && !j.at("mixing").is_null()) {
    const auto& mj = j.at("mixing");
    check_keys(mj, w + ".mixing", {"gamma", "rho", "k"});
    double gamma = 1.0;
    double rho = 0.5;
    std::size_t k = 1;
    read(mj, "gamma", gamma, w + ".mixing");
    read(mj, "rho", rho, w + ".mixing");
    read(mj, "k", k, w + ".mixing");
    try {
      c.mixing = bounds::MixingMode{mixing::geometric_profile(gamma, rho), k};
    } catch (const Error& e) {
      bad(w + ".mixing", e.what());
    }
  }
  if (j.contains("inputs")) {
    const auto& ij = j.at("inputs");
    check_keys(ij, w + ".inputs", {"mu_x", "mu_f", "c_z", "h_z", "h_v", "c42_target", "c42_sources"});
    auto& in = b.inputs;
    read(ij, "mu_x", in.mu_x, w + ".inputs");
    read(ij, "mu_f", in.mu_f, w + ".inputs");
    read(ij, "c_z", in.c_z, w + ".inputs");
    read(ij, "h_z", in.h_z, w + ".inputs");
    read(ij, "h_v", in.h_v, w + ".inputs");
    read(ij, "c42_target", in.c42_target, w + ".inputs");
    read(ij, "c42_sources", in.c42_sources, w + ".inputs");
  }
  try {
    c.validate();
  } catch (const Error& e) {
    bad(w, e.what());
  }
}

void parse_mixcheck(const json& j, MixcheckConfig& m) {
  const std::string w = "mixcheck";
  check_keys(j, w, {"markov_P", "max_lag", "lds_A", "mc_samples", "block_m", "delta", "smallball", "smallball_m",
                    "smallball_replicates"});
  if (j.contains("markov_P")) m.markov_p = read_matrix(j.at("markov_P"), w + ".markov_P");
  if (j.contains("lds_A")) m.lds_a = read_matrix(j.at("lds_A"), w + ".lds_A");
  read(j, "max_lag", m.max_lag, w);
  read(j, "mc_samples", m.mc_samples, w);
  read_opt(j, "block_m", m.block_m, w);
  read(j, "delta", m.delta, w);
  read(j, "smallball", m.smallball, w);
  read(j, "smallball_m", m.smallball_m, w);
  read(j, "smallball_replicates", m.smallball_replicates, w);
  if (m.max_lag < 1 || m.mc_samples < 1) bad(w, "max_lag and mc_samples must be >= 1");
  if (!(m.delta > 0.0 && m.delta < 1.0)) bad(w + ".delta", "must lie in (0, 1)");
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, "root", {"schema_version", "population", "samples", "fit", "sweep", "diagnostics", "bounds",
                           "mixcheck", "seed", "output_dir", "threads"});
  ExperimentConfig cfg;
  if (!doc.contains("schema_version")) bad("root", "missing schema_version");
  read(doc, "schema_version", cfg.schema_version, "root");
  if (cfg.schema_version != kSchemaVersion) {
    bad("schema_version", "unsupported version " + std::to_string(cfg.schema_version));
  }
  read(doc, "seed", cfg.seed, "root");
  read(doc, "output_dir", cfg.output_dir, "root");
  read(doc, "threads", cfg.threads, "root");
  if (doc.contains("population")) parse_population(doc.at("population"), cfg.population);
  if (doc.contains("samples")) parse_samples(doc.at("samples"), cfg.samples);
  if (doc.contains("fit")) parse_fit(doc.at("fit"), cfg.fit);
  if (doc.contains("sweep")) parse_sweep(doc.at("sweep"), cfg.sweep);
  if (doc.contains("diagnostics")) {
    const auto& dj = doc.at("diagnostics");
    check_keys(dj, "diagnostics", {"mc_samples"});
    read(dj, "mc_samples", cfg.diagnostics.mc_samples, "diagnostics");
    if (cfg.diagnostics.mc_samples < 1) bad("diagnostics.mc_samples", "must be >= 1");
  }
  parse_bounds(doc.contains("bounds") ? doc.at("bounds") : json::object(), cfg.bounds, cfg);
  if (doc.contains("mixcheck")) parse_mixcheck(doc.at("mixcheck"), cfg.mixcheck);
  cfg.source = doc;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::InvalidArgument, "config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidArgument, std::string("config: parse error: ") + e.what());
  }
  return parse_config(doc);
}

std::string config_hash(const json& doc) {
  const std::string text = doc.dump();  // nlohmann orders object keys
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mtrl::app
