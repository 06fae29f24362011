#include "mtrl/serialize.hpp"

#include "mtrl/error.hpp"

namespace mtrl {

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const Matrix& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
  require(j.is_object() && j.contains("rows") && j.contains("cols") && j.contains("data"),
          ErrorCode::InvalidArgument, "matrix JSON needs rows, cols and data");
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  require(rows >= 0 && cols >= 0 && data.is_array() && static_cast<Eigen::Index>(data.size()) == rows * cols,
          ErrorCode::InvalidArgument, "matrix JSON: data length must equal rows * cols");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
  }
  return m;
}

Json to_json(const Representation& rep) {
  Json j;
  j["input_dim"] = rep.input_dim();
  j["output_dim"] = rep.output_dim();
  j["sup_bound"] = rep.sup_bound();
  if (const auto* member = rep.member()) {
    j["kind"] = "finite_member";
    j["dictionary_id"] = member->dictionary_id;
    j["index"] = member->index;
    j["member"] = to_json(*member->target);
  } else if (const auto* g = rep.linear_map()) {
    j["kind"] = "linear";
    j["G"] = to_json(*g);
  } else {
    j["kind"] = "parametric";
    j["family"] = "tanh_features";
    j["W"] = to_json(*rep.tanh_weights());
  }
  return j;
}

Json to_json(const CovariateLaw& law) {
  Json j;
  j["kind"] = law_name(law);
  if (const auto* g = std::get_if<GaussianLaw>(&law)) j["sigma"] = to_json(g->sigma);
  if (const auto* lds = std::get_if<LdsLaw>(&law)) j["A"] = to_json(lds->A);
  if (const auto* mc = std::get_if<MarkovChainLaw>(&law)) {
    j["P"] = to_json(mc->P);
    j["embedding"] = to_json(mc->embedding);
    j["stationary"] = to_json(Matrix(mc->stationary.transpose()));
  }
  return j;
}

Json to_json(const erm::FirstStageFit& fit) {
  Json heads = Json::array();
  for (const auto& h : fit.heads) heads.push_back(to_json(h.F));
  Json j{{"heads", std::move(heads)},
         {"rep", to_json(fit.rep)},
         {"per_task_residual", fit.per_task_residual},
         {"objective", fit.objective},
         {"iterations", fit.iterations},
         {"converged", fit.converged},
         {"objective_trace", fit.objective_trace}};
  j["dictionary_index"] = fit.dictionary_index ? Json(*fit.dictionary_index) : Json(nullptr);
  return j;
}

Json to_json(const erm::SecondStageFit& fit) {
  return {{"head", to_json(fit.head.F)}, {"residual", fit.residual}};
}

Json to_json(const diagnostics::DiagnosticsReport& r) {
  return {{"mu_x", optional_number(r.mu_x)},
          {"mu_f", optional_number(r.mu_f)},
          {"nu_true", optional_number(r.nu_true)},
          {"nu_hat", optional_number(r.nu_hat)},
          {"excess_risk_target", r.excess_risk_target},
          {"est_error_avg", r.est_error_avg},
          {"nrls_excess", r.nrls_excess},
          {"nrls",
           {{"sigma_u_sq", r.nrls.sigma_u_sq},
            {"sigma_v_sq", r.nrls.sigma_v_sq},
            {"c_z", r.nrls.c_z},
            {"h_z", r.nrls.h_z},
            {"h_v", r.nrls.h_v}}},
          {"mu_x_variant", "given_g"},
          {"analytic", r.analytic}};
}

Json to_json(const mixing::MixingProfile& p) {
  Json j;
  j["kind"] = mixing::to_string(p.kind);
  if (p.kind == mixing::ProfileKind::Exact) {
    j["phi"] = p.phi;
    if (p.tail) j["tail"] = {{"gamma", p.tail->gamma}, {"rho", p.tail->rho}};
  } else {
    j["gamma"] = p.rate.gamma;
    j["rho"] = p.rate.rho;
    j["expected_tv_surrogate"] = p.expected_tv_surrogate;
  }
  j["phi_capital"] = p.phi_capital;
  return j;
}

Json to_json(const bounds::BoundReport& r) {
  Json burn = Json::array();
  for (const auto& b : r.burn_ins) {
    burn.push_back({{"name", b.name}, {"required", b.required}, {"actual", b.actual}, {"satisfied", b.satisfied}});
  }
  return {{"covering_log", r.covering_log},
          {"martingale_bound", r.martingale_bound},
          {"est_error_bound", r.est_error_bound},
          {"nrls_bound", r.nrls_bound},
          {"transfer_bound", r.transfer_bound},
          {"mu_x", r.mu_x},
          {"mu_f", r.mu_f},
          {"gamma", r.gamma},
          {"tau", r.tau},
          {"c_universal", r.c_universal},
          {"up_to_constant", r.up_to_constant},
          {"mixing", r.mixing},
          {"block_length", r.block_length},
          {"phi_capital", r.phi_capital},
          {"burn_ins", std::move(burn)}};
}

Json dataset_manifest(const datagen::SampleRequest& req) {
  const auto& spec = req.spec;
  Json tasks = Json::array();
  for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
    tasks.push_back({{"task_id", t},
                     {"role", t == 0 ? "target" : "source"},
                     {"n", t < req.per_task_n.size() ? req.per_task_n[t] : 0},
                     {"seed", datagen::task_seed(req.seed, t)},
                     {"kind", to_string(is_trajectory_law(spec.tasks[t].law) ? SampleKind::Trajectory
                                                                              : SampleKind::IidDraw)},
                     {"law", to_json(spec.tasks[t].law)},
                     {"head", to_json(spec.tasks[t].head.F)},
                     {"file", "task_" + std::to_string(t) + ".csv"}});
  }
  Json j{{"dims", {{"d_x", spec.dims.d_x}, {"d_y", spec.dims.d_y}, {"r", spec.dims.r}}},
         {"seed", req.seed},
         {"noise_sigma", spec.noise_sigma},
         {"rep_star", to_json(spec.rep_star)},
         {"tasks", std::move(tasks)}};
  j["burn_in_steps"] = req.burn_in_steps ? Json(*req.burn_in_steps) : Json(nullptr);
  return j;
}

}  // namespace mtrl
