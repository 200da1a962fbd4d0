#include "fixtures.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "artifacts.hpp"

#ifndef REGIMEALLOC_FIXTURES_DIR
#define REGIMEALLOC_FIXTURES_DIR "data/fixtures"
#endif

namespace regimealloc::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

AssetSetFixtures load_set(const std::filesystem::path& dir, const std::string& prefix) {
    AssetSetFixtures s;
    s.total_return_weights = load_fixture_table(dir / (prefix + "_total_return_weights.csv"));
    s.annual_returns = load_fixture_table(dir / (prefix + "_annual_returns.csv"));
    s.annual_volatility = load_fixture_table(dir / (prefix + "_annual_volatility.csv"));
    s.annual_sharpe = load_fixture_table(dir / (prefix + "_annual_sharpe.csv"));
    s.totals = load_fixture_table(dir / (prefix + "_totals.csv"));
    return s;
}

StateMethodAssignment load_assignment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read fixture '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    StateMethodAssignment a;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != 2) throw ValidationError(path.string() + ": expected state,method");
        if (std::stoi(cells[0]) != static_cast<int>(a.best.size()) + 1)
            throw ValidationError(path.string() + ": states must be listed in order");
        a.best.push_back(method_from_string(cells[1]));
    }
    return a;
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// Half a unit in the last printed decimal of a fixture value.
constexpr double kHalfUlp6 = 5e-7;

}  // namespace

Eigen::Index FixtureTable::column(std::string_view name) const {
    for (std::size_t c = 1; c < header.size(); ++c)
        if (header[c] == name) return static_cast<Eigen::Index>(c - 1);
    throw ValidationError("fixture has no column '" + std::string(name) + "'");
}

Eigen::Index FixtureTable::row(std::string_view key) const {
    for (std::size_t r = 0; r < keys.size(); ++r)
        if (keys[r] == key) return static_cast<Eigen::Index>(r);
    throw ValidationError("fixture has no row '" + std::string(key) + "'");
}

FixtureTable load_fixture_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read fixture '" + path.string() + "'");
    FixtureTable t;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": wrong field count");
        t.keys.push_back(cells[0]);
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            double v = 0.0;
            const auto& s = cells[c];
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || p != s.data() + s.size())
                throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    const auto cols = t.header.empty() ? 0 : static_cast<Eigen::Index>(t.header.size() - 1);
    t.values.resize(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (Eigen::Index c = 0; c < cols; ++c) t.values(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    return t;
}

std::filesystem::path default_fixtures_dir() { return REGIMEALLOC_FIXTURES_DIR; }

PaperFixtures load_paper_fixtures(const std::filesystem::path& dir) {
    PaperFixtures fx;
    fx.transition = load_fixture_table(dir / "first_asset_transition_matrix.csv").values;
    fx.first_assignment = load_assignment(dir / "first_asset_state_methods.csv");
    fx.printed_indicators = load_fixture_table(dir / "first_asset_printed_indicators.csv");
    fx.mixing_times = load_fixture_table(dir / "mixing_times.csv");
    fx.first = load_set(dir, "first_asset");
    fx.second = load_set(dir, "second_asset");
    if (fx.transition.rows() != fx.first_assignment.k())
        throw ValidationError("fixture transition matrix and state assignment disagree on k");
    return fx;
}

std::vector<SharpeCell> sharpe_cells(const PaperFixtures& fx, double risk_free_rate) {
    std::vector<SharpeCell> cells;
    const std::pair<const char*, const AssetSetFixtures*> sets[] = {{"first", &fx.first}, {"second", &fx.second}};
    for (const auto& [name, set] : sets) {
        const auto& r = set->annual_returns;
        for (std::size_t c = 1; c < r.header.size(); ++c) {
            const auto& method = r.header[c];
            const auto vc = set->annual_volatility.column(method);
            const auto sc = set->annual_sharpe.column(method);
            for (std::size_t y = 0; y < r.keys.size(); ++y) {
                SharpeCell cell;
                cell.asset_set = name;
                cell.year = std::stoi(r.keys[y]);
                cell.method = method;
                cell.annual_return = r.values(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(c - 1));
                const auto vr = set->annual_volatility.row(r.keys[y]);
                const auto sr = set->annual_sharpe.row(r.keys[y]);
                cell.volatility = set->annual_volatility.values(vr, vc);
                cell.tabulated = set->annual_sharpe.values(sr, sc);
                cell.recomputed = sharpe_ratio(cell.annual_return, cell.volatility, risk_free_rate).value_or(NAN);
                double lo = INFINITY, hi = -INFINITY;
                for (double dr : {-kHalfUlp6, kHalfUlp6})
                    for (double dv : {-kHalfUlp6, kHalfUlp6}) {
                        const double s = (cell.annual_return + dr - risk_free_rate) / (cell.volatility + dv);
                        lo = std::min(lo, s);
                        hi = std::max(hi, s);
                    }
                cell.band_low = lo;
                cell.band_high = hi;
                cells.push_back(cell);
            }
        }
    }
    return cells;
}

TotalReturnWeights reproduce_first_asset_weights(const PaperFixtures& fx) {
    return total_return_weights(fx.transition, fx.first_assignment);
}

TotalMetrics reproduce_totals(const AssetSetFixtures& set, std::string_view method, double risk_free_rate) {
    const auto col = set.annual_returns.column(method);
    std::vector<double> annual(static_cast<std::size_t>(set.annual_returns.values.rows()));
    for (std::size_t i = 0; i < annual.size(); ++i) annual[i] = set.annual_returns.values(static_cast<Eigen::Index>(i), col);
    return totals_from_annual(annual, risk_free_rate);
}

nlohmann::json fixtures_report(const PaperFixtures& fx, double epsilon, double risk_free_rate) {
    using nlohmann::json;
    json report = json::object();

    const auto w = reproduce_first_asset_weights(fx);
    const double w_err = max_abs(w.weights - fx.first.total_return_weights.values);
    report["first_asset_total_return_weights"] = {
        {"max_abs_error", number(w_err)}, {"tolerance", 1e-5}, {"passed", w_err <= 1e-5},
        {"recomputed", matrix_json(w.weights)}};

    const auto& second_w = fx.second.total_return_weights.values;
    const double row_err = (second_w.rowwise().sum().array() - 1.0).abs().maxCoeff();
    report["second_asset_total_return_weight_row_sums"] = {
        {"max_abs_error", number(row_err)}, {"tolerance", 1e-5}, {"passed", row_err <= 1e-5}};

    json printed = json::array();
    for (std::size_t r = 0; r < fx.printed_indicators.keys.size(); ++r) {
        const auto m = method_from_string(fx.printed_indicators.keys[r]);
        const Eigen::VectorXd prose = fx.first_assignment.indicator(m);
        for (Eigen::Index s = 0; s < prose.size(); ++s)
            if (prose(s) != fx.printed_indicators.values(static_cast<Eigen::Index>(r), s))
                printed.push_back({{"method", fx.printed_indicators.keys[r]}, {"state", s + 1},
                                   {"printed", fx.printed_indicators.values(static_cast<Eigen::Index>(r), s)},
                                   {"prose", prose(s)}});
    }
    report["printed_indicator_discrepancies"] = printed;

    json mixing = json::array();
    bool mixing_ok = true;
    for (std::size_t r = 0; r < fx.mixing_times.keys.size(); ++r) {
        const double lambda = fx.mixing_times.values(static_cast<Eigen::Index>(r), 0);
        const double eps = fx.mixing_times.values(static_cast<Eigen::Index>(r), 1);
        const auto expected = static_cast<long>(fx.mixing_times.values(static_cast<Eigen::Index>(r), 2));
        const long got = mixing_point_estimate(lambda, eps);
        mixing_ok = mixing_ok && got == expected;
        mixing.push_back({{"asset_set", fx.mixing_times.keys[r]}, {"slem", lambda}, {"epsilon", eps},
                          {"expected", expected}, {"computed", got}, {"passed", got == expected}});
    }
    report["mixing_point_estimates"] = {{"cases", mixing}, {"passed", mixing_ok}};
    report["first_asset_matrix_spectral"] = spectral_json(mixing_analysis(normalize_rows(fx.transition), epsilon));

    const auto cells = sharpe_cells(fx, risk_free_rate);
    std::size_t within = 0, banded = 0;
    double worst = 0.0;
    for (const auto& c : cells) {
        within += c.error() <= 1e-4;
        banded += c.within_rounding();
        worst = std::max(worst, c.error());
    }
    report["sharpe_convention"] = {{"cells", cells.size()},
                                   {"within_1e-4", within},
                                   {"consistent_with_rounding", banded},
                                   {"max_abs_error", number(worst)},
                                   {"risk_free_rate", risk_free_rate}};

    json totals = json::object();
    const std::pair<const char*, const AssetSetFixtures*> sets[] = {{"first", &fx.first}, {"second", &fx.second}};
    for (const auto& [name, set] : sets) {
        json rows = json::array();
        for (std::size_t r = 0; r < set->totals.keys.size(); ++r) {
            const auto& method = set->totals.keys[r];
            const auto t = reproduce_totals(*set, method, risk_free_rate);
            const auto row = static_cast<Eigen::Index>(r);
            rows.push_back({{"method", method},
                            {"total_return", number(t.total_return)},
                            {"total_volatility", number(t.total_volatility)},
                            {"total_sharpe", t.total_sharpe ? number(*t.total_sharpe) : json(nullptr)},
                            {"tabulated_total_return", set->totals.values(row, 0)},
                            {"tabulated_total_volatility", set->totals.values(row, 1)},
                            {"tabulated_total_sharpe", set->totals.values(row, 2)}});
        }
        totals[name] = rows;
    }
    report["totals"] = totals;
    return report;
}

}  // namespace regimealloc::cli
