#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mtrl/datagen.hpp"
#include "mtrl/error.hpp"
#include "mtrl/serialize.hpp"
#include "mtrl_app/app.hpp"

namespace fs = std::filesystem;
using namespace mtrl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSweepFailed = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::InvalidArgument, "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

int cmd_gen(const app::ExperimentConfig& cfg, const fs::path& out) {
  datagen::LinearInstanceOptions opts = cfg.population.instance;
  datagen::SampleRequest req;
  req.spec = datagen::make_linear_instance(opts, cfg.population.instance_seed.value_or(derive_seed(cfg.seed, 0)));
  req.per_task_n.assign(opts.num_sources + 1, cfg.samples.n);
  req.per_task_n[0] = cfg.samples.n_prime;
  req.seed = derive_seed(cfg.seed, 1);
  req.burn_in_steps = cfg.samples.burn_in;
  const auto data = datagen::sample_tasks(req, cfg.threads);
  for (std::size_t t = 0; t < data.size(); ++t) {
    std::ofstream csv(out / ("task_" + std::to_string(t) + ".csv"), std::ios::binary);
    datagen::write_csv(data[t], csv);
  }
  write_json(out / "manifest.json", dataset_manifest(req));
  return kExitOk;
}

int cmd_fit(const app::ExperimentConfig& cfg, const fs::path& out) {
  const auto trial = app::run_trial(cfg, cfg.population.instance.num_sources, cfg.samples.n, cfg.samples.n_prime,
                                    cfg.seed);
  Json j{{"first_stage", to_json(trial.first)}, {"second_stage", to_json(trial.second)}};
  if (trial.first.rep.is_linear() && trial.spec.rep_star.is_linear()) {
    j["rep_error"] = max_principal_angle_sin(*trial.first.rep.linear_map(), *trial.spec.rep_star.linear_map());
  }
  write_json(out / "fit.json", j);
  return kExitOk;
}

int cmd_diagnose(const app::ExperimentConfig& cfg, const fs::path& out) {
  write_json(out / "diagnostics.json", to_json(app::run_diagnose(cfg)));
  return kExitOk;
}

int cmd_bounds(const app::ExperimentConfig& cfg, const fs::path& out) {
  const auto report = app::run_bounds(cfg);
  write_json(out / "bounds.json", to_json(report));
  write_text(out / "burn_in.csv", bounds::burn_in_csv(report));
  return kExitOk;
}

int cmd_sweep(const app::ExperimentConfig& cfg, const fs::path& out) {
  const auto result = app::run_sweep(cfg);
  {
    std::ofstream csv(out / "sweep.csv", std::ios::binary);
    app::write_sweep_csv(result, csv);
  }
  {
    std::ofstream csv(out / "timings.csv", std::ios::binary);
    app::write_timings_csv(result, csv);
  }
  write_json(out / "summary.json", app::sweep_summary(cfg, result));
  return kExitOk;
}

int cmd_mixcheck(const app::ExperimentConfig& cfg, const fs::path& out) {
  write_json(out / "mixcheck.json", app::run_mixcheck(cfg));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Multi-task representation learning laboratory"};
  cli.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
  cli.add_option("--config", config_path, "Experiment config (JSON)")->required();
  cli.add_option("--seed", seed, "Override the config seed");
  cli.add_option("--out", out_dir, "Override the output directory");
  cli.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  cli.fallthrough();

  using Command = int (*)(const app::ExperimentConfig&, const fs::path&);
  const std::pair<const char*, Command> commands[] = {
      {"gen", cmd_gen},       {"fit", cmd_fit},     {"diagnose", cmd_diagnose},
      {"bounds", cmd_bounds}, {"sweep", cmd_sweep}, {"mixcheck", cmd_mixcheck},
  };
  const char* help[] = {"Sample a dataset to CSV plus a JSON manifest",
                        "Run the two-stage fit",
                        "Compute the diagnostics report",
                        "Evaluate the transfer-risk bounds",
                        "Run a rate sweep",
                        "Check the mixing and small-ball machinery"};
  for (std::size_t i = 0; i < std::size(commands); ++i) cli.add_subcommand(commands[i].first, help[i]);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    app::ExperimentConfig cfg = app::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.output_dir = *out_dir;
    if (threads) cfg.threads = *threads;
    const fs::path out(cfg.output_dir);
    fs::create_directories(out);
    for (const auto& [name, fn] : commands) {
      if (cli.got_subcommand(name)) return fn(cfg, out);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::SweepFailed ? kExitSweepFailed : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitValidation;
}
