#pragma once

// Price panels with a known two-regime volatility path, for end-to-end runs
// where the true state of every day is available.

#include <cstdint>
#include <vector>

#include "regimealloc/marketdata.hpp"

namespace regimealloc::cli {

struct SyntheticConfig {
    int n_days = 3000;  ///< return days; prices have one more row
    int n_assets = 3;
    int block_days = 500;  ///< regime alternates every block, starting calm
    double calm_vol = 0.005;
    double stressed_vol = 0.03;
    std::uint64_t seed = 2024;
};

struct SyntheticData {
    PriceSeries prices;
    std::vector<int> regimes;  ///< per return day: 1 calm, 2 stressed
};

SyntheticData generate_synthetic(const SyntheticConfig& cfg = {});

}  // namespace regimealloc::cli
