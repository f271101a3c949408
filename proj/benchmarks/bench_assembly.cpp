#include "fixtures.hpp"

#include "sdelearn/covariance_estimator.hpp"

#include <benchmark/benchmark.h>

using namespace sdelearn;
using sdelearn::testing::fit_basis;
using sdelearn::testing::make_model;
using sdelearn::testing::sim;
using sdelearn::testing::uniform_box;

namespace {

const TrajectoryBundle& data_2d() {
    static const TrajectoryBundle b = euler_maruyama(
        make_model({"0.4*x1 - 0.1*x1*x2", "-0.8*x2 + 0.2*x1^2"}, {"0.6", "0.2", "0.2", "0.8"}, uniform_box(2, 0, 2)),
        sim(1.0, 0.001, 200, 1, false));
    return b;
}

}  // namespace

static void BM_AssembleDiagonal(benchmark::State& state) {
    const TrajectoryBundle& b = data_2d();
    const auto basis = fit_basis(b, BasisKind::BSpline, 2, static_cast<int>(state.range(0)));
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 2);
    S.diagonal() << 0.4, 0.68;
    const CovModel cov = CovModel::constant(S);
    for (auto _ : state) benchmark::DoNotOptimize(assemble_diagonal(b, *basis, cov));
    state.counters["n"] = static_cast<double>(basis->size());
}
BENCHMARK(BM_AssembleDiagonal)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_AssembleFull(benchmark::State& state) {
    const TrajectoryBundle& b = data_2d();
    const auto basis = fit_basis(b, BasisKind::BSpline, 2, static_cast<int>(state.range(0)));
    Eigen::MatrixXd S(2, 2);
    S << 0.4, 0.28, 0.28, 0.68;
    const CovModel cov = CovModel::constant(S);
    for (auto _ : state) benchmark::DoNotOptimize(assemble_full(b, *basis, cov));
    state.counters["n"] = static_cast<double>(basis->size());
}
BENCHMARK(BM_AssembleFull)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_EstimateStateDependentCovariance(benchmark::State& state) {
    const TrajectoryBundle& b = data_2d();
    const auto basis = fit_basis(b, BasisKind::BSpline, 2, 4);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_state_dependent(b, basis));
}
BENCHMARK(BM_EstimateStateDependentCovariance)->Unit(benchmark::kMillisecond);
