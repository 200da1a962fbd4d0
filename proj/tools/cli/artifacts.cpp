#include "artifacts.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace regimealloc::cli {

namespace {

std::string fmt17(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string opt_field(const std::optional<double>& v) { return v ? fmt17(*v) : std::string(); }

json labels_json(const RegimeModel& m) {
    json arr = json::array();
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        if (m.dates.size() == m.labels.size())
            arr.push_back(json::array({format_iso_date(m.dates[i]), m.labels[i]}));
        else
            arr.push_back(json::array({nullptr, m.labels[i]}));
    }
    return arr;
}

json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

}  // namespace

json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return std::strtod(buf, nullptr);
}

json vector_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(number(v(i)));
    return arr;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ValidationError("expected a non-empty matrix");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols) throw ValidationError("ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& cell = row.at(static_cast<std::size_t>(c));
            m(i, c) = cell.is_null() ? std::nan("") : cell.get<double>();
        }
    }
    return m;
}

json load_report_json(const LoadReport& r) {
    return json{{"rows_read", r.rows_read},
                {"rows_dropped", r.rows_dropped},
                {"date_range", json::array({format_iso_date(r.first_date), format_iso_date(r.last_date)})},
                {"tickers", r.tickers}};
}

json regime_model_json(const RegimeModel& m) {
    json c = json::array();
    for (double v : m.centroids) c.push_back(number(v));
    return json{{"k", m.k()},          {"centroids", c},
                {"seed", m.seed},      {"wcss", number(m.wcss)},
                {"iterations_run", m.iterations_run}, {"labels", labels_json(m)}};
}

RegimeModel regime_model_from_json(const json& j) {
    RegimeModel m;
    try {
        m.centroids = j.at("centroids").get<std::vector<double>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.wcss = j.at("wcss").get<double>();
        m.iterations_run = j.at("iterations_run").get<int>();
        for (const auto& pair : j.at("labels")) {
            if (!pair.at(0).is_null()) m.dates.push_back(parse_iso_date(pair.at(0).get<std::string>()));
            m.labels.push_back(pair.at(1).get<int>());
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("regimes.json: ") + e.what());
    }
    if (j.at("k").get<int>() != m.k()) throw ValidationError("regimes.json: k does not match centroid count");
    return m;
}

json transitions_json(const TransitionArtifact& t) {
    json j{{"k", t.posterior.k()},
           {"alpha", matrix_json(t.prior.alpha)},
           {"counts", matrix_json(t.counts.counts.cast<double>())},
           {"posterior_alpha", matrix_json(t.posterior.posterior_alpha)},
           {"mean", matrix_json(t.posterior.mean)},
           {"source", t.source},
           {"batches", t.batches}};
    if (t.run) {
        j["psrf"] = matrix_json(t.run->psrf.psrf);
        j["max_psrf"] = number(t.run->psrf.max_psrf);
        j["converged"] = t.run->psrf.converged;
        j["gibbs"] = json{{"chains", t.run->n_chains},
                          {"iterations", t.run->n_iters},
                          {"burn_in", t.run->burn_in},
                          {"seed", t.run->seed},
                          {"retained_draws", t.run->summary.draws},
                          {"sample_stdev", matrix_json(t.run->summary.stdev)}};
    } else {
        j["psrf"] = nullptr;
        j["max_psrf"] = nullptr;
        j["converged"] = false;
    }
    return j;
}

Eigen::MatrixXd transition_matrix_from_json(const json& j) {
    try {
        return matrix_from_json(j.at("mean"));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("transitions.json: ") + e.what());
    }
}

json spectral_json(const SpectralSummary& s) {
    json moduli = json::array();
    for (double m : s.eigen_moduli) moduli.push_back(number(m));
    return json{{"epsilon", number(s.epsilon)},
                {"slem", number(s.slem)},
                {"t_rel", number(s.t_rel)},
                {"pi", vector_json(s.stationary)},
                {"pi_min", number(s.pi_min)},
                {"lower_bound", number(s.lower_bound)},
                {"upper_bound", number(s.upper_bound)},
                {"point_estimate", s.point_estimate},
                {"reversible", s.reversible},
                {"detailed_balance_residual", number(s.detailed_balance_residual)},
                {"bounds_reversible_only", s.bounds_reversible_only},
                {"eigen_moduli", moduli}};
}

json allocation_json(const Allocation& a) {
    const auto& d = a.diagnostics;
    return json{{"method", std::string(to_string(a.weights.method))},
                {"weights", vector_json(a.weights.weights)},
                {"objective", number(d.objective_value)},
                {"dr", number(d.dr)},
                {"trc", vector_json(d.trc)},
                {"iterations", d.iterations},
                {"residual", number(d.constraint_residual)},
                {"regularization", number(d.regularization)}};
}

WeightVector weights_from_json(const json& j) {
    try {
        const auto w = j.at("weights").get<std::vector<double>>();
        WeightVector out;
        out.method = method_from_string(j.at("method").get<std::string>());
        out.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        return out;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("allocations.json: ") + e.what());
    }
}

json assignment_json(const StateMethodAssignment& a) {
    json best = json::array();
    for (auto m : a.best) best.push_back(std::string(to_string(m)));
    json ind = json::object();
    for (auto m : kAllMethods) {
        json v = json::array();
        const auto p = a.indicator(m);
        for (Eigen::Index i = 0; i < p.size(); ++i) v.push_back(static_cast<int>(p(i)));
        ind[std::string(to_string(m))] = v;
    }
    return json{{"k", a.k()}, {"best", best}, {"indicators", ind}};
}

json total_return_weights_json(const TotalReturnWeights& w) {
    json methods = json::array();
    for (auto m : w.methods) methods.push_back(std::string(to_string(m)));
    return json{{"methods", methods}, {"weights", matrix_json(w.weights)}};
}

json report_json(const PerformanceReport& r) {
    json series = json::array();
    for (const auto& s : r.series) {
        json years = json::array();
        for (const auto& y : s.years)
            years.push_back(json{{"year", y.year},
                                 {"days", y.days},
                                 {"annual_return", number(y.annual_return)},
                                 {"volatility", number(y.volatility)},
                                 {"sharpe", optional_number(y.sharpe)},
                                 {"note", y.note}});
        series.push_back(json{{"name", s.name},
                              {"years", years},
                              {"totals",
                               json{{"total_return", number(s.totals.total_return)},
                                    {"total_volatility", number(s.totals.total_volatility)},
                                    {"total_sharpe", optional_number(s.totals.total_sharpe)},
                                    {"note", s.totals.note}}}});
    }
    return json{{"risk_free_rate", number(r.risk_free_rate)}, {"series", series}};
}

std::string prices_csv(const PriceSeries& p) {
    std::ostringstream os;
    os << "date";
    for (const auto& t : p.tickers) os << ',' << t;
    os << '\n';
    for (std::size_t i = 0; i < p.size(); ++i) {
        os << format_iso_date(p.dates[i]);
        for (Eigen::Index c = 0; c < p.prices.cols(); ++c) os << ',' << fmt17(p.prices(static_cast<Eigen::Index>(i), c));
        os << '\n';
    }
    return os.str();
}

std::string returns_csv(const ReturnSeries& r) {
    std::ostringstream os;
    os << "date";
    for (const auto& t : r.tickers) os << ',' << t;
    os << '\n';
    for (std::size_t i = 0; i < r.size(); ++i) {
        os << format_iso_date(r.dates[i]);
        for (Eigen::Index c = 0; c < r.returns.cols(); ++c)
            os << ',' << fmt17(r.returns(static_cast<Eigen::Index>(i), c));
        os << '\n';
    }
    return os.str();
}

ReturnSeries parse_returns_csv(std::string_view text, std::string_view source) {
    ReturnSeries out;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (line_no == 1) {
            if (cells.empty() || cells.front() != "date")
                throw ValidationError(std::string(source) + ":1: expected a 'date' header");
            out.tickers.assign(cells.begin() + 1, cells.end());
            continue;
        }
        if (cells.size() != out.tickers.size() + 1)
            throw ValidationError(std::string(source) + ":" + std::to_string(line_no) + ": wrong field count");
        out.dates.push_back(parse_iso_date(cells.front()));
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            double v = 0.0;
            const auto& s = cells[c];
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || p != s.data() + s.size())
                throw ValidationError(std::string(source) + ":" + std::to_string(line_no) + ": malformed return '" + s +
                                      "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(std::string(source) + ": no return rows");
    out.returns.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(out.tickers.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < rows[i].size(); ++c)
            out.returns(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    return out;
}

std::string volatility_csv(const VolatilitySeries& v) {
    std::ostringstream os;
    os << "date,volatility\n";
    for (std::size_t i = 0; i < v.size(); ++i) os << format_iso_date(v.dates[i]) << ',' << fmt17(v.values[i]) << '\n';
    return os.str();
}

std::string total_return_weights_csv(const TotalReturnWeights& w) {
    std::ostringstream os;
    os << "state";
    for (auto m : w.methods) os << ',' << to_string(m);
    os << '\n';
    for (Eigen::Index i = 0; i < w.weights.rows(); ++i) {
        os << i + 1;
        for (Eigen::Index c = 0; c < w.weights.cols(); ++c) os << ',' << fmt17(w.weights(i, c));
        os << '\n';
    }
    return os.str();
}

std::string yearly_csv(const PerformanceReport& r) {
    std::ostringstream os;
    os << "year";
    for (const auto& s : r.series) os << ',' << s.name << "_return," << s.name << "_volatility," << s.name << "_sharpe";
    os << '\n';
    if (r.series.empty()) return os.str();
    for (std::size_t y = 0; y < r.series.front().years.size(); ++y) {
        os << r.series.front().years[y].year;
        for (const auto& s : r.series) {
            const auto& ym = s.years[y];
            os << ',' << fmt17(ym.annual_return) << ',' << fmt17(ym.volatility) << ',' << opt_field(ym.sharpe);
        }
        os << '\n';
    }
    return os.str();
}

std::string totals_csv(const PerformanceReport& r) {
    std::ostringstream os;
    os << "method,total_return,total_volatility,total_sharpe\n";
    for (const auto& s : r.series)
        os << s.name << ',' << fmt17(s.totals.total_return) << ',' << fmt17(s.totals.total_volatility) << ','
           << opt_field(s.totals.total_sharpe) << '\n';
    return os.str();
}

std::string value_paths_csv(const BacktestLedger& l) {
    std::ostringstream os;
    os << "date,state";
    for (const auto& n : l.series_names()) os << ',' << n;
    os << '\n';
    for (std::size_t t = 0; t < l.size(); ++t) {
        os << (l.dates.size() == l.size() ? format_iso_date(l.dates[t]) : std::to_string(t)) << ',' << l.states[t];
        for (Eigen::Index c = 0; c < l.values.cols(); ++c) os << ',' << fmt17(l.values(static_cast<Eigen::Index>(t), c));
        os << '\n';
    }
    return os.str();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError("'" + path.string() + "': " + e.what());
    }
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ValidationError("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

void write_json(const std::filesystem::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw ComputationError("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

}  // namespace regimealloc::cli
