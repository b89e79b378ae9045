#include <benchmark/benchmark.h>

#include "coalsim/replicates.hpp"

namespace {

coalsim::ReplicateSpec neutral_spec(std::size_t N) {
    coalsim::ReplicateSpec spec;
    spec.n = 5;
    spec.N = N;
    return spec;
}

void BM_ReplicatesSerial(benchmark::State& state) {
    const auto spec = neutral_spec(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto out = coalsim::run_replicates_serial(spec, 7, 1, 64);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * 64);
}

void BM_ReplicatesParallel(benchmark::State& state) {
    const auto spec = neutral_spec(static_cast<std::size_t>(state.range(0)));
    const auto workers = static_cast<unsigned>(state.range(1));
    for (auto _ : state) {
        auto out = coalsim::run_replicates_parallel(spec, 7, 1, 64, workers);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * 64);
}

}  // namespace

BENCHMARK(BM_ReplicatesSerial)->Arg(50)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReplicatesParallel)
    ->ArgsProduct({{50, 200, 1000}, {1, 2, 4}})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
