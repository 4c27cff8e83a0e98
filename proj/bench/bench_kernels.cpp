// Serial vs OpenMP-parallel timings of the hot loops.

#include "gpssm/pgas.hpp"
#include "gpssm/saem.hpp"
#include "gpssm/simulate.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace gpssm;

namespace {

HyperParams nonlinear_theta() {
  return HyperParams{Kernel::product({Kernel::matern(1, 10.0, 300.0),
                                      Kernel::squared_exponential({3.0}, std::nullopt)}),
                     MeanFunction::zero(2, 1), ProcessNoise::from_variances({10.0}),
                     ObsModel::quadratic_gaussian(0.05, 1.0), InitialStatePrior{5.0, true}};
}

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void BM_PgasSweep(benchmark::State& state) {
  const Dataset data = simulate_nonlinear(120, 1);
  const HyperParams theta = nonlinear_theta();
  PgasConfig cfg;
  cfg.particles = 15;
  cfg.execution = mode(state);
  std::mt19937_64 rng(1);
  Trajectory x = *data.x_true;
  for (auto _ : state) {
    x = pgas_sweep(data, x, theta, cfg, rng);
    benchmark::DoNotOptimize(x.data());
  }
}

void BM_QValueGrad(benchmark::State& state) {
  const Dataset data = simulate_nonlinear(120, 1);
  const HyperParams theta = nonlinear_theta();
  WeightedTrajectorySet set(0.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  for (int j = 0; j < 16; ++j) {
    Trajectory x = *data.x_true;
    for (Eigen::Index t = 0; t < x.rows(); ++t) x(t, 0) += n01(rng);
    set.add(x, j == 0 ? 1.0 : 0.3);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(q_value_grad(set, data, theta, mode(state)).value);
  }
}

void BM_AncestorWeights(benchmark::State& state) {
  const Dataset data = simulate_nonlinear(120, 1);
  const HyperParams theta = nonlinear_theta();
  PgasConfig cfg;
  cfg.particles = 15;
  const Trajectory& ref = *data.x_true;
  const Eigen::Index t = 60;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::vector<Trajectory> hist;
  for (std::size_t i = 0; i + 1 < cfg.particles; ++i) {
    Trajectory h = ref.topRows(t);
    for (Eigen::Index s = 0; s < t; ++s) h(s, 0) += n01(rng);
    hist.push_back(h);
  }
  hist.push_back(ref.topRows(t));
  const auto sys = ParticleSystem::from_histories(data, ref, theta, cfg, hist,
                                                  std::vector<double>(cfg.particles, 0.0));
  const bool blocked = state.range(0) == 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(blocked ? sys.ancestor_log_weights() : sys.ancestor_log_weights_reference());
  }
}

}  // namespace

// Argument 0 is the serial or reference path, 1 the parallel or blocked path.
BENCHMARK(BM_PgasSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_QValueGrad)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AncestorWeights)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
