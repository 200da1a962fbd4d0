#pragma once

/**
 * @file dynamic.hpp
 * @brief State-dependent blending of the static allocators and the
 * performance accounting around it.
 *
 * Each state gets the static method with the best compounded return on that
 * state's days. The transition matrix then turns those per-state winners
 * into total return weights, W = P * [p_ERC p_MinVar p_MaxDiv p_Equal],
 * where p_m is the indicator vector of the states that method m wins. The
 * dynamic strategy earns sum_m W[s_t][m] * r_m[t+1] on day t+1, using only
 * the state known at the close of day t.
 */

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regimealloc/allocators.hpp"
#include "regimealloc/marketdata.hpp"

namespace regimealloc {

/// Daily returns of the static allocators, one column per method.
struct StaticReturns {
    std::vector<Date> dates;
    std::vector<Method> methods;
    Eigen::MatrixXd returns;  ///< days x methods
};

/// Fixed-weight daily returns r_m[t] = w_m' r[t] for each allocation.
StaticReturns static_returns(const ReturnSeries& returns, std::span<const WeightVector> allocations);

/**
 * Walk-forward variant: the calendar is cut into blocks of `refit_months`
 * months, and each block uses weights fitted on every return before the
 * block starts. The first block has no history and is fitted on itself.
 */
StaticReturns walk_forward_static_returns(const ReturnSeries& returns, std::span<const Method> methods,
                                          int refit_months, const SolverOptions& opts = {});

struct StateMethodAssignment {
    std::vector<Method> best;  ///< best[i] is the winner for state i + 1

    int k() const noexcept { return static_cast<int>(best.size()); }
    /// Binary k-vector with ones at the states `m` wins.
    Eigen::VectorXd indicator(Method m) const;

    /// Rebuilds an assignment from explicit indicator vectors. Throws
    /// ValidationError unless they partition the states.
    static StateMethodAssignment from_indicators(const std::map<Method, Eigen::VectorXd>& indicators);
};

/// argmax over methods of prod_{t: label[t] = i} (1 + r_m[t]); ties go to the
/// earlier method in ERC, MinVar, MaxDiv, Equal order.
StateMethodAssignment select_best_methods(const StaticReturns& returns, std::span<const int> labels, int k);

struct TotalReturnWeights {
    std::vector<Method> methods;
    Eigen::MatrixXd weights;  ///< k x methods; row i is the blend used when today's state is i + 1
};

TotalReturnWeights total_return_weights(const Eigen::MatrixXd& transition, const StateMethodAssignment& assignment,
                                        std::span<const Method> methods = kAllMethods);

enum class BlendMode { Blend, Argmax };

struct BacktestLedger {
    std::vector<Date> dates;
    std::vector<int> states;
    std::vector<Method> methods;   ///< static columns; the dynamic strategy is kept separately
    Eigen::MatrixXd static_returns;  ///< days x methods
    Eigen::VectorXd dynamic_returns; ///< NaN on day 0, which has no prior state
    Eigen::MatrixXd values;          ///< days x (methods + 1), last column dynamic; row 0 is 1

    std::size_t size() const noexcept { return states.size(); }
    std::vector<std::string> series_names() const;
    /// Returns of series `s` (static columns then dynamic) over days 1..T-1.
    std::vector<double> evaluated_returns(std::size_t s) const;
};

/// Runs the t -> t+1 strategy. `labels` must align one-to-one with the rows of
/// `returns`; W columns must match the static return columns.
BacktestLedger run_dynamic_backtest(const StaticReturns& returns, std::span<const int> labels,
                                    const TotalReturnWeights& weights, BlendMode mode = BlendMode::Blend);

struct YearMetrics {
    int year = 0;
    std::size_t days = 0;
    double annual_return = 0.0;
    double volatility = 0.0;
    std::optional<double> sharpe;
    std::string note;  ///< why sharpe is missing, when it is
};

struct TotalMetrics {
    double total_return = 0.0;
    double total_volatility = 0.0;
    std::optional<double> total_sharpe;
    std::string note;
};

struct SeriesReport {
    std::string name;
    std::vector<YearMetrics> years;
    TotalMetrics totals;
};

struct PerformanceReport {
    double risk_free_rate = 0.01;
    std::vector<SeriesReport> series;
};

/// (annual_return - rf) / volatility, empty when volatility is zero.
std::optional<double> sharpe_ratio(double annual_return, double volatility, double risk_free_rate);

/// Compounded return and daily standard deviation of one year's returns.
YearMetrics year_metrics(int year, std::span<const double> daily, double risk_free_rate, int ddof = 1);

/// Totals from a column of annual returns: compounded product, population
/// standard deviation across years, and their Sharpe ratio.
TotalMetrics totals_from_annual(std::span<const double> annual_returns, double risk_free_rate);

PerformanceReport performance_report(const BacktestLedger& ledger, double risk_free_rate = 0.01, int ddof = 1);

}  // namespace regimealloc
