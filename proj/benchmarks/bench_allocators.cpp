#include <benchmark/benchmark.h>

#include <random>

#include "regimealloc/allocators.hpp"

using namespace regimealloc;

namespace {

CovarianceMatrix random_cov(int n) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 0.01);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = z(rng);
    Eigen::MatrixXd s = a * a.transpose();
    s.diagonal().array() += 1e-5;
    return CovarianceMatrix(s);
}

}  // namespace

static void BM_Allocate(benchmark::State& state) {
    const auto method = static_cast<Method>(state.range(0));
    const auto cov = random_cov(static_cast<int>(state.range(1)));
    state.SetLabel(std::string(to_string(method)));
    for (auto _ : state) benchmark::DoNotOptimize(allocate(method, cov).weights.weights.data());
}
BENCHMARK(BM_Allocate)
    ->ArgsProduct({{0, 1, 2, 3}, {3, 10, 30}})
    ->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
