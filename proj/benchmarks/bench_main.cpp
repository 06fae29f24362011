#include <benchmark/benchmark.h>

#include "mtrl/bounds.hpp"
#include "mtrl/datagen.hpp"
#include "mtrl/diagnostics.hpp"
#include "mtrl/erm.hpp"
#include "mtrl/mixing.hpp"
#include "mtrl/rng.hpp"

using namespace mtrl;

namespace {

std::vector<TaskDataset> sources(int d_x, std::size_t t, std::size_t n) {
  datagen::LinearInstanceOptions opts;
  opts.dims = Dims{d_x, 1, 2};
  opts.num_sources = t;
  opts.noise_sigma = 0.5;
  datagen::SampleRequest req;
  req.spec = datagen::make_linear_instance(opts, 1);
  req.per_task_n.assign(t + 1, n);
  req.seed = 2;
  auto data = datagen::sample_tasks(req);
  data.erase(data.begin());
  return data;
}

void BM_AlsFit(benchmark::State& state) {
  const auto data = sources(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)), 100);
  erm::LinearFitOptions fit;
  fit.restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(erm::fit_first_stage_linear(data, 2, fit).objective);
}
BENCHMARK(BM_AlsFit)->Args({10, 8})->Args({50, 16})->Args({100, 32})->Unit(benchmark::kMillisecond);

void BM_OffsetProjection(benchmark::State& state) {
  Rng rng(3);
  const Matrix z = rng.normal_matrix(state.range(0), 4);
  const Matrix w = rng.normal_matrix(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(erm::offset_projection_norm(z, w));
}
BENCHMARK(BM_OffsetProjection)->Arg(100)->Arg(10000);

void BM_MuX(benchmark::State& state) {
  datagen::LinearInstanceOptions opts;
  opts.dims = Dims{static_cast<int>(state.range(0)), 2, 3};
  opts.num_sources = 10;
  opts.covariates = datagen::CovariateFamily::RandomSpd;
  const auto spec = datagen::make_linear_instance(opts, 4);
  Rng rng(5);
  const auto g = Representation::linear(rng.normal_matrix(3, state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(diagnostics::mu_x(spec, g));
}
BENCHMARK(BM_MuX)->Arg(10)->Arg(100);

void BM_PhiMarkov(benchmark::State& state) {
  const Eigen::Index s = state.range(0);
  Matrix p = Matrix::Constant(s, s, 0.5 / static_cast<double>(s));
  p.diagonal().array() += 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(mixing::phi_markov(p, 50).phi_capital);
}
BENCHMARK(BM_PhiMarkov)->Arg(4)->Arg(64);

void BM_SnmCoverage(benchmark::State& state) {
  bounds::SnmConfig cfg;
  cfg.replicates = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bounds::snm_bound_check(cfg).violation_rate);
}
BENCHMARK(BM_SnmCoverage)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_LogIntegral(benchmark::State& state) {
  double c = 1e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bounds::log_integral_bound(c).integral);
    c = c < 1e6 ? c * 1.1 : 1e-3;
  }
}
BENCHMARK(BM_LogIntegral);

}  // namespace

BENCHMARK_MAIN();
