#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "regimealloc/transitions.hpp"

using namespace regimealloc;

static void BM_GibbsSample(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::int64_t> n(0, 50);
    std::vector<TransitionCounts> batches(4);
    for (auto& b : batches) {
        b.counts = CountMatrix(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) b.counts(i, j) = n(rng);
    }
    const auto cfg = GibbsConfig::with_default_burn_in(4, static_cast<int>(state.range(1)), 7);
    for (auto _ : state) benchmark::DoNotOptimize(gibbs_sample(DirichletPrior::uniform(k), batches, cfg).psrf.max_psrf);
}
BENCHMARK(BM_GibbsSample)->Args({10, 1000})->Args({10, 5000})->Args({3, 5000})->Unit(benchmark::kMillisecond);

static void BM_PosteriorMean(benchmark::State& state) {
    TransitionCounts c;
    c.counts = CountMatrix::Constant(10, 10, 25);
    const auto prior = DirichletPrior::uniform(10);
    for (auto _ : state) benchmark::DoNotOptimize(posterior_mean(prior, c).mean(0, 0));
}
BENCHMARK(BM_PosteriorMean);

BENCHMARK_MAIN();
