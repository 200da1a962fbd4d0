#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "regimealloc/dynamic.hpp"

using namespace regimealloc;

static void BM_DynamicBacktest(benchmark::State& state) {
    const auto days = static_cast<Eigen::Index>(state.range(0));
    const int k = 10;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z(0.0003, 0.01);
    StaticReturns s;
    s.methods.assign(kAllMethods.begin(), kAllMethods.end());
    s.returns.resize(days, 4);
    std::chrono::sys_days d = std::chrono::year{2000} / 1 / 3;
    for (Eigen::Index t = 0; t < days; ++t) {
        s.dates.emplace_back(d + std::chrono::days{t});
        for (int m = 0; m < 4; ++m) s.returns(t, m) = z(rng);
    }
    std::vector<int> labels(static_cast<std::size_t>(days));
    for (std::size_t t = 0; t < labels.size(); ++t) labels[t] = 1 + static_cast<int>((t / 20) % k);
    const auto assignment = select_best_methods(s, labels, k);
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(k, k, 0.02);
    p.diagonal().array() = 1.0 - 0.02 * (k - 1);
    const auto w = total_return_weights(p, assignment);
    for (auto _ : state) {
        const auto ledger = run_dynamic_backtest(s, labels, w);
        benchmark::DoNotOptimize(performance_report(ledger).series.size());
    }
    state.SetItemsProcessed(state.iterations() * days);
}
BENCHMARK(BM_DynamicBacktest)->Arg(2500)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
