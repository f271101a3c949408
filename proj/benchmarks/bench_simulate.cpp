#include "fixtures.hpp"

#include "sdelearn/spde.hpp"

#include <benchmark/benchmark.h>

using namespace sdelearn;
using sdelearn::testing::make_model;
using sdelearn::testing::sim;
using sdelearn::testing::uniform_box;

static void BM_EulerMaruyama1d(benchmark::State& state) {
    const SdeModel m = make_model({"2 + 0.08*x1 - 0.01*x1^2"}, {"0.6"}, uniform_box(1, 0, 10));
    const auto M = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(euler_maruyama(m, sim(1.0, 0.001, M, 1)));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * M * 1000));
}
BENCHMARK(BM_EulerMaruyama1d)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_SpdePiecewise(benchmark::State& state) {
    const auto N = static_cast<std::size_t>(state.range(0));
    const SpdeSpec spec = SpdeSpec::heat_piecewise(N, 2.0, 4.0, 0.5, 1.0, 0.01, 1);
    for (auto _ : state) {
        const TrajectoryBundle b = simulate_modes(spec, 1);
        benchmark::DoNotOptimize(estimate_theta_piecewise(b, spec));
    }
}
BENCHMARK(BM_SpdePiecewise)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
