#include <benchmark/benchmark.h>

#include "mgt/limit.hpp"
#include "mgt/linear.hpp"
#include "mgt/nonlinear.hpp"

namespace {

mgt::DataPreset gauss(int slot, double width = 1.0) {
    return {mgt::PresetKind::Gaussian, 1.0, width, {0, 0, 0}, slot};
}

void BM_RadialLinearSolve(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const mgt::LinearProblem p{{0.5, 1.0, 0.0, n}, {gauss(0), gauss(1), gauss(2)}};
    for (auto _ : state) benchmark::DoNotOptimize(mgt::hs_norm(mgt::solve_linear_hat(p, 1e3, 0), 0.0));
}
BENCHMARK(BM_RadialLinearSolve)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

void BM_ProfileResidual(benchmark::State& state) {
    const mgt::LinearProblem p{{0.5, 1.0, 0.0, 3}, {gauss(0), gauss(1), gauss(2)}};
    for (auto _ : state) benchmark::DoNotOptimize(mgt::residual_norm(p, {2, 1, 0.0}, 1e3));
}
BENCHMARK(BM_ProfileResidual)->Unit(benchmark::kMillisecond);

mgt::NonlinearProblem picard_problem(int N, double T) {
    mgt::NonlinearProblem p;
    p.params = {0.5, 1.0, 1.0, 1};
    p.data = {gauss(0), gauss(1)};
    p.epsilon = 0.05;
    p.grid = {1, N, 40.0};
    p.h = 0.01;
    p.T = T;
    return p;
}

void BM_PicardSolve(benchmark::State& state) {
    const auto p = picard_problem(static_cast<int>(state.range(0)), 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(mgt::picard_solve(p));
    state.SetItemsProcessed(state.iterations() * p.steps());
}
BENCHMARK(BM_PicardSolve)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_RkOracle(benchmark::State& state) {
    const auto p = picard_problem(static_cast<int>(state.range(0)), 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(mgt::rk_march_oracle(p));
    state.SetItemsProcessed(state.iterations() * p.steps());
}
BENCHMARK(BM_RkOracle)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_LimitGap(benchmark::State& state) {
    mgt::LimitProblem p;
    p.data = {gauss(0), gauss(1)};
    for (auto _ : state) benchmark::DoNotOptimize(mgt::limit_gap_at(p, 0.05, 10.0, mgt::GapNorm::LinfBound));
}
BENCHMARK(BM_LimitGap)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
