#include "sdelearn/basis.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace sdelearn;

static void BM_BSplineEval1d(benchmark::State& state) {
    const Basis1d b(BasisKind::BSpline, static_cast<int>(state.range(0)), 16, 0.0, 10.0);
    std::vector<double> out(b.size());
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (auto _ : state) {
        b.eval(u(rng), out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_BSplineEval1d)->DenseRange(1, 4);

static void BM_TensorEval(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    BasisSpec spec;
    spec.kind = BasisKind::BSpline;
    spec.degree = 2;
    spec.knots_per_dim.assign(d, 6);
    spec.domain = Domain{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    const BasisSet basis = make_basis(spec);
    std::vector<double> x(d, 0.37), out(basis.size());
    for (auto _ : state) {
        basis.eval(x, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.counters["functions"] = static_cast<double>(basis.size());
}
BENCHMARK(BM_TensorEval)->DenseRange(1, 3);
