#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "regimealloc/regimes.hpp"

using namespace regimealloc;

static void BM_KMeansFit(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::lognormal_distribution<double> vol(-4.5, 0.6);
    std::vector<double> x(static_cast<std::size_t>(state.range(0)));
    for (auto& v : x) v = vol(rng);
    ClusterConfig cfg;
    cfg.k = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(kmeans_fit(x, cfg).wcss);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KMeansFit)->Args({1000, 10})->Args({5000, 10})->Args({5000, 2})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
