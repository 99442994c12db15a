// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "lisest/power_system.hpp"
#include "lisest/sim.hpp"
#include "lisest/stability.hpp"

namespace {

lisest::LisModel power_model(int areas) {
  lisest::PowerSystemConfig cfg;
  cfg.areas = areas;
  cfg.switch_period = 0;
  return lisest::generate_power_system(cfg, 42);
}

template <bool Parallel>
void dmre_step(benchmark::State& state) {
  const auto model = power_model(static_cast<int>(state.range(0)));
  const auto theta = lisest::decoupling_variables(model, lisest::DecouplingPolicy::out_neighbor, 0);
  const auto p0 = lisest::DmreState::initial(model, 1.0);
  for (auto _ : state) {
    auto next = Parallel ? lisest::dmre_step(p0, model, theta) : lisest::reference::dmre_step(p0, model, theta);
    benchmark::DoNotOptimize(next.p.data());
  }
}

template <bool Parallel>
void monte_carlo(benchmark::State& state) {
  const auto model = power_model(10);
  lisest::EstimatorConfig dist;
  lisest::MonteCarloOptions o;
  o.trials = static_cast<int>(state.range(0));
  o.horizon = 100;
  lisest::NoiseSpec noise;
  noise.kind = lisest::NoiseKind::uniform;
  for (auto _ : state) {
    auto ens = Parallel ? lisest::monte_carlo_rmse(model, {dist}, noise, o)
                        : lisest::reference::monte_carlo_rmse(model, {dist}, noise, o);
    benchmark::DoNotOptimize(ens.front().rmse.data());
  }
}

}  // namespace

BENCHMARK_TEMPLATE(dmre_step, false)->Name("dmre_step/serial")->Arg(10)->Arg(40)->Arg(100);
BENCHMARK_TEMPLATE(dmre_step, true)->Name("dmre_step/openmp")->Arg(10)->Arg(40)->Arg(100);
BENCHMARK_TEMPLATE(monte_carlo, false)->Name("monte_carlo_rmse/serial")->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(monte_carlo, true)->Name("monte_carlo_rmse/openmp")->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
