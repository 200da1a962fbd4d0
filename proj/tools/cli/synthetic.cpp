#include "synthetic.hpp"

#include <cmath>
#include <random>

#include "regimealloc/error.hpp"

namespace regimealloc::cli {

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.n_days < 2 || cfg.n_assets < 1 || cfg.block_days < 1)
        throw ValidationError("synthetic: n_days >= 2, n_assets >= 1 and block_days >= 1 required");
    if (!(cfg.calm_vol > 0.0) || !(cfg.stressed_vol > 0.0))
        throw ValidationError("synthetic: volatilities must be positive");

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.0, 1.0);

    const auto n = static_cast<Eigen::Index>(cfg.n_assets);
    Eigen::VectorXd scale(n), drift(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        scale(j) = 0.6 + 0.8 * u(rng);
        drift(j) = 1e-4 * (u(rng) - 0.3);
    }

    SyntheticData out;
    out.prices.tickers.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) out.prices.tickers.push_back("SYN" + std::to_string(j + 1));
    out.prices.prices.resize(cfg.n_days + 1, n);
    out.prices.prices.row(0).setConstant(100.0);

    std::chrono::sys_days day = std::chrono::year{2000} / std::chrono::January / 3;
    auto next_weekday = [&day] {
        do {
            day += std::chrono::days{1};
        } while (std::chrono::weekday{day} == std::chrono::Saturday || std::chrono::weekday{day} == std::chrono::Sunday);
    };
    out.prices.dates.push_back(day);

    out.regimes.reserve(static_cast<std::size_t>(cfg.n_days));
    for (int t = 0; t < cfg.n_days; ++t) {
        const int regime = (t / cfg.block_days) % 2 == 0 ? 1 : 2;
        out.regimes.push_back(regime);
        const double vol = regime == 1 ? cfg.calm_vol : cfg.stressed_vol;
        const double factor = z(rng);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double r = drift(j) + vol * scale(j) * (0.8 * factor + 0.6 * z(rng));
            out.prices.prices(t + 1, j) = out.prices.prices(t, j) * (1.0 + r);
        }
        next_weekday();
        out.prices.dates.push_back(day);
    }
    out.prices.validate();
    return out;
}

}  // namespace regimealloc::cli
