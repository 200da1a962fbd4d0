#pragma once

// Published tables shipped as CSV under data/fixtures, and the algebraic
// checks that can be rerun against them without the original price history.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "regimealloc/regimealloc.hpp"

namespace regimealloc::cli {

/// A CSV with a key column followed by numeric columns.
struct FixtureTable {
    std::vector<std::string> header;  ///< includes the key column name
    std::vector<std::string> keys;
    Eigen::MatrixXd values;

    Eigen::Index column(std::string_view name) const;
    Eigen::Index row(std::string_view key) const;
};

FixtureTable load_fixture_table(const std::filesystem::path& path);

struct AssetSetFixtures {
    FixtureTable total_return_weights;
    FixtureTable annual_returns;
    FixtureTable annual_volatility;
    FixtureTable annual_sharpe;
    FixtureTable totals;
};

struct PaperFixtures {
    Eigen::MatrixXd transition;  ///< first asset set, as printed
    StateMethodAssignment first_assignment;
    FixtureTable printed_indicators;
    FixtureTable mixing_times;
    AssetSetFixtures first;
    AssetSetFixtures second;
};

std::filesystem::path default_fixtures_dir();
PaperFixtures load_paper_fixtures(const std::filesystem::path& dir);

struct SharpeCell {
    std::string asset_set;
    int year = 0;
    std::string method;
    double annual_return = 0.0;
    double volatility = 0.0;
    double tabulated = 0.0;
    double recomputed = 0.0;
    /// Range of Sharpe values reachable when return and volatility move
    /// within half a unit of their last printed decimal.
    double band_low = 0.0;
    double band_high = 0.0;

    double error() const { return std::abs(recomputed - tabulated); }
    bool within_rounding() const { return tabulated >= band_low && tabulated <= band_high; }
};

std::vector<SharpeCell> sharpe_cells(const PaperFixtures& fx, double risk_free_rate = 0.01);

/// Total return weights rebuilt from the printed matrix and the prose assignment.
TotalReturnWeights reproduce_first_asset_weights(const PaperFixtures& fx);

/// Totals recomputed from the annual-return column of `method`.
TotalMetrics reproduce_totals(const AssetSetFixtures& set, std::string_view method, double risk_free_rate = 0.01);

/// Every fixture check, with residuals, as a JSON document.
nlohmann::json fixtures_report(const PaperFixtures& fx, double epsilon = 0.01, double risk_free_rate = 0.01);

}  // namespace regimealloc::cli
