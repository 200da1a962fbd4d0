#include "regimealloc/dynamic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "regimealloc/error.hpp"

namespace regimealloc {

namespace {

int rank(Method m) { return static_cast<int>(m); }

// Column order with ties resolved by the fixed method order.
std::vector<std::size_t> tie_order(const std::vector<Method>& methods) {
    std::vector<std::size_t> order(methods.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rank(methods[a]) < rank(methods[b]); });
    return order;
}

int year_of(const Date& d) { return static_cast<int>(d.year()); }

int month_index(const Date& d) { return year_of(d) * 12 + static_cast<int>(static_cast<unsigned>(d.month())) - 1; }

}  // namespace

StaticReturns static_returns(const ReturnSeries& returns, std::span<const WeightVector> allocations) {
    StaticReturns out;
    out.dates = returns.dates;
    out.returns.resize(returns.returns.rows(), static_cast<Eigen::Index>(allocations.size()));
    for (std::size_t m = 0; m < allocations.size(); ++m) {
        const auto& w = allocations[m].weights;
        if (w.size() != returns.returns.cols())
            throw ValidationError("static_returns: weight vector size does not match asset count");
        out.methods.push_back(allocations[m].method);
        out.returns.col(static_cast<Eigen::Index>(m)) = returns.returns * w;
    }
    return out;
}

StaticReturns walk_forward_static_returns(const ReturnSeries& returns, std::span<const Method> methods,
                                          int refit_months, const SolverOptions& opts) {
    if (refit_months < 1) throw ValidationError("refit cadence must be >= 1 month");
    if (returns.dates.empty()) throw ValidationError("walk-forward: empty return series");

    StaticReturns out;
    out.dates = returns.dates;
    out.methods.assign(methods.begin(), methods.end());
    out.returns.resize(returns.returns.rows(), static_cast<Eigen::Index>(methods.size()));

    const int first = month_index(returns.dates.front());
    const auto n_assets = static_cast<std::size_t>(returns.returns.cols());
    std::size_t begin = 0;
    while (begin < returns.dates.size()) {
        const int block = (month_index(returns.dates[begin]) - first) / refit_months;
        std::size_t end = begin;
        while (end < returns.dates.size() && (month_index(returns.dates[end]) - first) / refit_months == block) ++end;

        std::vector<std::size_t> train(begin);
        std::iota(train.begin(), train.end(), std::size_t{0});
        if (train.size() < n_assets + 1) {
            train.resize(end - begin);
            std::iota(train.begin(), train.end(), begin);
        }
        const auto cov = estimate_covariance(returns, train);
        for (std::size_t m = 0; m < methods.size(); ++m) {
            const Eigen::VectorXd w = allocate(methods[m], cov, opts).weights.weights;
            for (std::size_t t = begin; t < end; ++t)
                out.returns(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(m)) =
                    returns.returns.row(static_cast<Eigen::Index>(t)).dot(w);
        }
        begin = end;
    }
    return out;
}

Eigen::VectorXd StateMethodAssignment::indicator(Method m) const {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(k());
    for (int i = 0; i < k(); ++i)
        if (best[static_cast<std::size_t>(i)] == m) p(i) = 1.0;
    return p;
}

StateMethodAssignment StateMethodAssignment::from_indicators(const std::map<Method, Eigen::VectorXd>& indicators) {
    if (indicators.empty()) throw ValidationError("indicators: none given");
    const auto k = indicators.begin()->second.size();
    std::vector<int> cover(static_cast<std::size_t>(k), 0);
    StateMethodAssignment out;
    out.best.assign(static_cast<std::size_t>(k), Method::Equal);
    for (const auto& [m, p] : indicators) {
        if (p.size() != k) throw ValidationError("indicators: length mismatch");
        for (Eigen::Index i = 0; i < k; ++i) {
            if (p(i) != 0.0 && p(i) != 1.0) throw ValidationError("indicators: entries must be 0 or 1");
            if (p(i) == 1.0) {
                ++cover[static_cast<std::size_t>(i)];
                out.best[static_cast<std::size_t>(i)] = m;
            }
        }
    }
    for (std::size_t i = 0; i < cover.size(); ++i)
        if (cover[i] != 1)
            throw ValidationError("indicators do not partition the states: state " + std::to_string(i + 1) +
                                  " is covered by " + std::to_string(cover[i]) + " methods");
    return out;
}

StateMethodAssignment select_best_methods(const StaticReturns& returns, std::span<const int> labels, int k) {
    if (k < 1) throw ValidationError("select_best_methods: k must be >= 1");
    if (labels.size() != static_cast<std::size_t>(returns.returns.rows()))
        throw ValidationError("select_best_methods: labels and returns are misaligned");
    if (returns.methods.empty()) throw ValidationError("select_best_methods: no methods");
    const auto n_methods = returns.methods.size();

    Eigen::MatrixXd growth = Eigen::MatrixXd::Ones(k, static_cast<Eigen::Index>(n_methods));
    std::vector<std::size_t> days(static_cast<std::size_t>(k), 0);
    for (std::size_t t = 0; t < labels.size(); ++t) {
        const int s = labels[t];
        if (s < 1 || s > k) throw ValidationError("select_best_methods: label out of range at day " + std::to_string(t));
        ++days[static_cast<std::size_t>(s - 1)];
        for (std::size_t m = 0; m < n_methods; ++m)
            growth(s - 1, static_cast<Eigen::Index>(m)) *=
                1.0 + returns.returns(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(m));
    }

    const auto order = tie_order(returns.methods);
    StateMethodAssignment out;
    out.best.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        if (days[static_cast<std::size_t>(i)] == 0)
            throw ValidationError("state " + std::to_string(i + 1) + " has zero days");
        std::size_t best = order.front();
        for (auto m : order)
            if (growth(i, static_cast<Eigen::Index>(m)) > growth(i, static_cast<Eigen::Index>(best))) best = m;
        out.best[static_cast<std::size_t>(i)] = returns.methods[best];
    }
    return out;
}

TotalReturnWeights total_return_weights(const Eigen::MatrixXd& transition, const StateMethodAssignment& assignment,
                                        std::span<const Method> methods) {
    const auto k = assignment.k();
    if (transition.rows() != k || transition.cols() != k)
        throw ValidationError("total_return_weights: transition matrix is " + std::to_string(transition.rows()) + "x" +
                              std::to_string(transition.cols()) + " for " + std::to_string(k) + " states");
    if ((transition.array() < 0.0).any()) throw ValidationError("total_return_weights: negative transition probability");
    for (auto m : assignment.best)
        if (std::find(methods.begin(), methods.end(), m) == methods.end())
            throw ValidationError("indicators do not partition the states: method " + std::string(to_string(m)) +
                                  " has no column");

    TotalReturnWeights out;
    out.methods.assign(methods.begin(), methods.end());
    out.weights.resize(k, static_cast<Eigen::Index>(methods.size()));
    for (std::size_t m = 0; m < methods.size(); ++m)
        out.weights.col(static_cast<Eigen::Index>(m)) = transition * assignment.indicator(methods[m]);
    return out;
}

std::vector<std::string> BacktestLedger::series_names() const {
    std::vector<std::string> names;
    for (auto m : methods) names.emplace_back(to_string(m));
    names.emplace_back("Dynamic");
    return names;
}

std::vector<double> BacktestLedger::evaluated_returns(std::size_t s) const {
    std::vector<double> out;
    if (size() < 2) return out;
    out.reserve(size() - 1);
    for (std::size_t t = 1; t < size(); ++t) {
        const auto row = static_cast<Eigen::Index>(t);
        out.push_back(s < methods.size() ? static_returns(row, static_cast<Eigen::Index>(s)) : dynamic_returns(row));
    }
    return out;
}

BacktestLedger run_dynamic_backtest(const StaticReturns& returns, std::span<const int> labels,
                                    const TotalReturnWeights& weights, BlendMode mode) {
    const auto days = static_cast<std::size_t>(returns.returns.rows());
    if (labels.size() != days) throw ValidationError("backtest: labels and returns are misaligned");
    if (!returns.dates.empty() && returns.dates.size() != days) throw ValidationError("backtest: dates and returns are misaligned");
    if (days < 2) throw ValidationError("backtest: need at least 2 days");
    if (weights.methods != returns.methods)
        throw ValidationError("backtest: total return weight columns do not match the static return columns");
    const auto k = static_cast<int>(weights.weights.rows());
    for (std::size_t t = 0; t < days; ++t)
        if (labels[t] < 1 || labels[t] > k)
            throw ValidationError("backtest: missing or out-of-range label at day " + std::to_string(t));

    BacktestLedger ledger;
    ledger.dates = returns.dates;
    ledger.states.assign(labels.begin(), labels.end());
    ledger.methods = returns.methods;
    ledger.static_returns = returns.returns;
    const auto n_methods = static_cast<Eigen::Index>(returns.methods.size());
    ledger.dynamic_returns = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(days),
                                                       std::numeric_limits<double>::quiet_NaN());

    const auto order = tie_order(returns.methods);
    for (std::size_t t = 1; t < days; ++t) {
        const auto row = static_cast<Eigen::Index>(t);
        const Eigen::RowVectorXd blend = weights.weights.row(labels[t - 1] - 1);
        if (mode == BlendMode::Blend) {
            ledger.dynamic_returns(row) = blend.dot(returns.returns.row(row));
        } else {
            std::size_t pick = order.front();
            for (auto m : order)
                if (blend(static_cast<Eigen::Index>(m)) > blend(static_cast<Eigen::Index>(pick))) pick = m;
            ledger.dynamic_returns(row) = returns.returns(row, static_cast<Eigen::Index>(pick));
        }
    }

    ledger.values.resize(static_cast<Eigen::Index>(days), n_methods + 1);
    ledger.values.row(0).setOnes();
    for (std::size_t t = 1; t < days; ++t) {
        const auto row = static_cast<Eigen::Index>(t);
        for (Eigen::Index m = 0; m < n_methods; ++m)
            ledger.values(row, m) = ledger.values(row - 1, m) * (1.0 + returns.returns(row, m));
        ledger.values(row, n_methods) = ledger.values(row - 1, n_methods) * (1.0 + ledger.dynamic_returns(row));
    }
    return ledger;
}

std::optional<double> sharpe_ratio(double annual_return, double volatility, double risk_free_rate) {
    if (!(volatility > 0.0) || !std::isfinite(volatility)) return std::nullopt;
    return (annual_return - risk_free_rate) / volatility;
}

YearMetrics year_metrics(int year, std::span<const double> daily, double risk_free_rate, int ddof) {
    if (daily.empty()) throw ValidationError("year " + std::to_string(year) + " has no returns");
    YearMetrics y;
    y.year = year;
    y.days = daily.size();
    double growth = 1.0;
    double mean = 0.0;
    for (double r : daily) {
        growth *= 1.0 + r;
        mean += r;
    }
    y.annual_return = growth - 1.0;
    mean /= static_cast<double>(daily.size());
    if (daily.size() > static_cast<std::size_t>(ddof)) {
        double ss = 0.0;
        for (double r : daily) ss += (r - mean) * (r - mean);
        y.volatility = std::sqrt(ss / static_cast<double>(daily.size() - static_cast<std::size_t>(ddof)));
    } else {
        y.volatility = 0.0;
        y.note = "too few days for a standard deviation";
    }
    y.sharpe = sharpe_ratio(y.annual_return, y.volatility, risk_free_rate);
    if (!y.sharpe && y.note.empty()) y.note = "zero volatility";
    return y;
}

TotalMetrics totals_from_annual(std::span<const double> annual_returns, double risk_free_rate) {
    if (annual_returns.empty()) throw ValidationError("totals: no annual returns");
    TotalMetrics t;
    double growth = 1.0;
    double mean = 0.0;
    for (double a : annual_returns) {
        growth *= 1.0 + a;
        mean += a;
    }
    mean /= static_cast<double>(annual_returns.size());
    double ss = 0.0;
    for (double a : annual_returns) ss += (a - mean) * (a - mean);
    t.total_return = growth - 1.0;
    t.total_volatility = std::sqrt(ss / static_cast<double>(annual_returns.size()));
    t.total_sharpe = sharpe_ratio(t.total_return, t.total_volatility, risk_free_rate);
    if (!t.total_sharpe) t.note = "zero volatility across years";
    return t;
}

PerformanceReport performance_report(const BacktestLedger& ledger, double risk_free_rate, int ddof) {
    if (ledger.size() < 2) throw ValidationError("performance_report: ledger needs at least 2 days");
    if (ledger.dates.size() != ledger.size()) throw ValidationError("performance_report: ledger has no dates");

    PerformanceReport report;
    report.risk_free_rate = risk_free_rate;
    const auto names = ledger.series_names();
    for (std::size_t s = 0; s < names.size(); ++s) {
        SeriesReport sr;
        sr.name = names[s];
        const auto daily = ledger.evaluated_returns(s);
        std::size_t begin = 0;
        while (begin < daily.size()) {
            const int year = year_of(ledger.dates[begin + 1]);
            std::size_t end = begin;
            while (end < daily.size() && year_of(ledger.dates[end + 1]) == year) ++end;
            sr.years.push_back(
                year_metrics(year, std::span<const double>(daily).subspan(begin, end - begin), risk_free_rate, ddof));
            begin = end;
        }
        std::vector<double> annual;
        for (const auto& y : sr.years) annual.push_back(y.annual_return);
        sr.totals = totals_from_annual(annual, risk_free_rate);
        report.series.push_back(std::move(sr));
    }
    return report;
}

}  // namespace regimealloc
