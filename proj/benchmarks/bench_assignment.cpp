#include "sdelearn/assignment.hpp"
#include "sdelearn/metrics.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace sdelearn;

static void BM_Assignment(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = u(rng);
    for (auto _ : state) benchmark::DoNotOptimize(solve_assignment(cost));
    state.SetComplexityN(n);
}
BENCHMARK(BM_Assignment)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oNCubed)->Unit(benchmark::kMillisecond);

static void BM_Wasserstein2d(benchmark::State& state) {
    const auto M = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    Snapshot a, b;
    a.dim = b.dim = 2;
    for (std::size_t i = 0; i < 2 * M; ++i) {
        a.points.push_back(g(rng));
        b.points.push_back(g(rng) + 0.5);
    }
    for (auto _ : state) benchmark::DoNotOptimize(wasserstein2(a, b));
}
BENCHMARK(BM_Wasserstein2d)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);
