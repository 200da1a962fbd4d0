#pragma once

/**
 * @file marketdata.hpp
 * @brief Daily price ingestion, simple returns and the rolling volatility
 * observable used for regime classification.
 *
 * Series are stored day-major: row t of a matrix is trading day t, column j
 * is asset j. Volatility values are aligned to the end of their window, so
 * value[i] covers return days i .. i + window - 1.
 */

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace regimealloc {

using Date = std::chrono::year_month_day;

/// Parses a strict YYYY-MM-DD date. Throws ValidationError on anything else.
Date parse_iso_date(std::string_view text);
std::string format_iso_date(const Date& d);

struct PriceSeries {
    std::vector<Date> dates;
    std::vector<std::string> tickers;
    Eigen::MatrixXd prices;  ///< days x assets, adjusted closes

    std::size_t size() const noexcept { return dates.size(); }
    std::size_t asset_count() const noexcept { return tickers.size(); }

    /// Checks the ordering, positivity and shape invariants.
    void validate() const;
};

struct ReturnSeries {
    std::vector<Date> dates;
    std::vector<std::string> tickers;
    Eigen::MatrixXd returns;  ///< days x assets, simple daily returns

    std::size_t size() const noexcept { return dates.size(); }
    std::size_t asset_count() const noexcept { return tickers.size(); }
};

struct VolatilitySeries {
    std::vector<Date> dates;
    std::vector<double> values;
    int window = 22;

    std::size_t size() const noexcept { return values.size(); }
};

struct CsvLayout {
    std::string date_column = "date";
    char delimiter = ',';
};

struct LoadReport {
    std::size_t rows_read = 0;     ///< data rows seen across all files
    std::size_t rows_dropped = 0;  ///< rows lost to missing cells or the date join
    Date first_date{};
    Date last_date{};
    std::vector<std::string> tickers;
};

struct LoadResult {
    PriceSeries prices;
    LoadReport report;
};

/// Loads one CSV: a date column plus one numeric column per ticker.
/// Rows with an empty or NA cell are dropped and counted.
LoadResult load_prices(const std::filesystem::path& path, const CsvLayout& layout = {});

/// Loads several CSVs and inner-joins them on date.
LoadResult load_prices(std::span<const std::filesystem::path> paths, const CsvLayout& layout = {});

/// Parses CSV text already in memory. `source` names the origin in error messages.
LoadResult parse_prices(std::string_view csv_text, const CsvLayout& layout = {},
                        std::string_view source = "<memory>");

ReturnSeries compute_returns(const PriceSeries& prices);

enum class ReturnKind { Simple, Log };

struct VolatilityOptions {
    int window = 22;
    int ddof = 1;  ///< 1 = sample standard deviation, 0 = population
    ReturnKind kind = ReturnKind::Simple;
};

/// Daily returns of a fixed-weight portfolio. Empty weights mean equal weight.
std::vector<double> portfolio_returns(const ReturnSeries& returns, std::span<const double> weights = {});

/// Rolling standard deviation of the reference-portfolio daily return.
VolatilitySeries rolling_volatility(const ReturnSeries& returns, std::span<const double> reference_weights = {},
                                    const VolatilityOptions& options = {});

/// Same computation over an already formed portfolio return stream.
std::vector<double> rolling_stdev(std::span<const double> series, int window, int ddof = 1);

}  // namespace regimealloc
