#include <benchmark/benchmark.h>

#include "mgt/spectral.hpp"

namespace {

const mgt::ModelParams kParams{0.5, 1.0, 0.0, 1};

void BM_RootsExact(benchmark::State& state) {
    double k = 1e-3;
    for (auto _ : state) {
        benchmark::DoNotOptimize(mgt::roots_exact(kParams, k));
        k = k < 1e3 ? k * 1.01 : 1e-3;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RootsExact);

void BM_RootsSeries(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(mgt::roots_series(kParams, 1e-2, 4));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RootsSeries);

void BM_KernelTable(benchmark::State& state) {
    const double k = static_cast<double>(state.range(0)) / 100.0;
    for (auto _ : state) benchmark::DoNotOptimize(mgt::kernel_table(kParams, k, 7.5));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_KernelTable)->Arg(1)->Arg(100)->Arg(10000);

void BM_KernelTableOde(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(mgt::kernel_table_ode(kParams, 1.0, 7.5));
}
BENCHMARK(BM_KernelTableOde)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
