#include "regimealloc/marketdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "regimealloc/error.hpp"

namespace regimealloc {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

bool is_missing(std::string_view cell) {
    static constexpr std::string_view tokens[] = {"", "NA", "N/A", "NaN", "nan", "null", "NULL", "."};
    return std::find(std::begin(tokens), std::end(tokens), cell) != std::end(tokens);
}

std::string where(std::string_view source, std::size_t line) {
    std::ostringstream os;
    os << source << ":" << line;
    return os.str();
}

int parse_int(std::string_view s, std::string_view full) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ValidationError("malformed date '" + std::string(full) + "'");
    return v;
}

// One file, before joining: date -> row of prices (nullopt when the row had a missing cell).
struct RawTable {
    std::vector<std::string> tickers;
    std::map<std::chrono::sys_days, std::optional<std::vector<double>>> rows;
    std::size_t rows_read = 0;
};

RawTable parse_table(std::string_view text, const CsvLayout& layout, std::string_view source) {
    RawTable table;
    std::size_t line_no = 0;
    std::size_t date_col = 0;
    std::vector<std::size_t> value_cols;
    bool have_header = false;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;

        auto cells = split(line, layout.delimiter);
        if (!have_header) {
            auto it = std::find(cells.begin(), cells.end(), std::string_view(layout.date_column));
            if (it == cells.end())
                throw ValidationError(where(source, line_no) + ": missing '" + layout.date_column + "' column");
            date_col = static_cast<std::size_t>(it - cells.begin());
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (c == date_col) continue;
                if (cells[c].empty()) throw ValidationError(where(source, line_no) + ": empty column name");
                value_cols.push_back(c);
                table.tickers.emplace_back(cells[c]);
            }
            if (value_cols.empty())
                throw ValidationError(where(source, line_no) + ": no price columns");
            have_header = true;
            continue;
        }

        ++table.rows_read;
        if (cells.size() != value_cols.size() + 1)
            throw ValidationError(where(source, line_no) + ": expected " + std::to_string(value_cols.size() + 1) +
                                  " fields, found " + std::to_string(cells.size()));
        Date date;
        try {
            date = parse_iso_date(cells[date_col]);
        } catch (const ValidationError& e) {
            throw ValidationError(where(source, line_no) + ": " + e.what());
        }
        const auto day = std::chrono::sys_days(date);
        if (table.rows.contains(day))
            throw ValidationError(where(source, line_no) + ": duplicate date " + format_iso_date(date));

        std::vector<double> row;
        row.reserve(value_cols.size());
        bool missing = false;
        for (auto c : value_cols) {
            auto cell = cells[c];
            if (is_missing(cell)) {
                missing = true;
                continue;
            }
            double v = 0.0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || p != cell.data() + cell.size() || !std::isfinite(v))
                throw ValidationError(where(source, line_no) + ": malformed price '" + std::string(cell) + "'");
            if (v <= 0.0)
                throw ValidationError(where(source, line_no) + ": non-positive price " + std::string(cell));
            row.push_back(v);
        }
        if (missing)
            table.rows.emplace(day, std::nullopt);
        else
            table.rows.emplace(day, std::move(row));
    }
    if (!have_header) throw ValidationError(std::string(source) + ": empty file");
    return table;
}

LoadResult join(std::vector<RawTable> tables) {
    LoadResult result;
    auto& ps = result.prices;
    auto& rep = result.report;

    for (const auto& t : tables) {
        rep.rows_read += t.rows_read;
        for (const auto& name : t.tickers) {
            if (std::find(ps.tickers.begin(), ps.tickers.end(), name) != ps.tickers.end())
                throw ValidationError("duplicate ticker '" + name + "' across inputs");
            ps.tickers.push_back(name);
        }
    }

    // Dates present and complete in every table.
    std::vector<std::chrono::sys_days> common;
    for (const auto& [day, row] : tables.front().rows) {
        bool keep = true;
        for (const auto& t : tables) {
            auto it = t.rows.find(day);
            if (it == t.rows.end() || !it->second) {
                keep = false;
                break;
            }
        }
        if (keep) common.push_back(day);
    }
    if (common.empty()) throw ValidationError("empty intersection of dates across assets");

    ps.prices.resize(static_cast<Eigen::Index>(common.size()), static_cast<Eigen::Index>(ps.tickers.size()));
    ps.dates.reserve(common.size());
    for (std::size_t r = 0; r < common.size(); ++r) {
        ps.dates.emplace_back(common[r]);
        Eigen::Index col = 0;
        for (const auto& t : tables)
            for (double v : *t.rows.at(common[r])) ps.prices(static_cast<Eigen::Index>(r), col++) = v;
    }

    rep.rows_dropped = rep.rows_read - common.size() * tables.size();
    rep.first_date = ps.dates.front();
    rep.last_date = ps.dates.back();
    rep.tickers = ps.tickers;
    return result;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

Date parse_iso_date(std::string_view text) {
    text = trim(text);
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw ValidationError("malformed date '" + std::string(text) + "'");
    const int y = parse_int(text.substr(0, 4), text);
    const int m = parse_int(text.substr(5, 2), text);
    const int d = parse_int(text.substr(8, 2), text);
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) throw ValidationError("malformed date '" + std::string(text) + "'");
    return date;
}

std::string format_iso_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

void PriceSeries::validate() const {
    if (static_cast<std::size_t>(prices.rows()) != dates.size() ||
        static_cast<std::size_t>(prices.cols()) != tickers.size())
        throw ValidationError("price matrix shape does not match dates/tickers");
    for (std::size_t i = 1; i < dates.size(); ++i)
        if (!(dates[i - 1] < dates[i])) throw ValidationError("dates not strictly increasing");
    if ((prices.array() <= 0.0).any() || !prices.allFinite()) throw ValidationError("non-positive price");
}

LoadResult parse_prices(std::string_view csv_text, const CsvLayout& layout, std::string_view source) {
    std::vector<RawTable> tables;
    tables.push_back(parse_table(csv_text, layout, source));
    return join(std::move(tables));
}

LoadResult load_prices(const std::filesystem::path& path, const CsvLayout& layout) {
    const std::filesystem::path one[] = {path};
    return load_prices(std::span<const std::filesystem::path>(one), layout);
}

LoadResult load_prices(std::span<const std::filesystem::path> paths, const CsvLayout& layout) {
    if (paths.empty()) throw ValidationError("no input files");
    std::vector<RawTable> tables;
    for (const auto& p : paths) tables.push_back(parse_table(slurp(p), layout, p.string()));
    return join(std::move(tables));
}

ReturnSeries compute_returns(const PriceSeries& prices) {
    if (prices.size() < 2) throw ValidationError("series too short: need at least 2 prices");
    prices.validate();
    ReturnSeries out;
    out.tickers = prices.tickers;
    out.dates.assign(prices.dates.begin() + 1, prices.dates.end());
    const auto n = prices.prices.rows();
    out.returns = prices.prices.bottomRows(n - 1).array() / prices.prices.topRows(n - 1).array() - 1.0;
    return out;
}

std::vector<double> portfolio_returns(const ReturnSeries& returns, std::span<const double> weights) {
    const auto n = static_cast<std::size_t>(returns.returns.cols());
    Eigen::VectorXd w;
    if (weights.empty()) {
        w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
    } else {
        if (weights.size() != n)
            throw ValidationError("reference weights have " + std::to_string(weights.size()) + " entries for " +
                                  std::to_string(n) + " assets");
        w = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(n));
    }
    Eigen::VectorXd r = returns.returns * w;
    return {r.data(), r.data() + r.size()};
}

std::vector<double> rolling_stdev(std::span<const double> series, int window, int ddof) {
    if (window < 2) throw ValidationError("window must be >= 2");
    if (ddof < 0 || ddof >= window) throw ValidationError("ddof must be in [0, window)");
    if (series.size() < static_cast<std::size_t>(window))
        throw ValidationError("series shorter than window (" + std::to_string(series.size()) + " < " +
                              std::to_string(window) + ")");
    const auto w = static_cast<std::size_t>(window);
    std::vector<double> out(series.size() - w + 1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto win = series.subspan(i, w);
        double mean = 0.0;
        for (double x : win) mean += x;
        mean /= static_cast<double>(w);
        double ss = 0.0;
        for (double x : win) ss += (x - mean) * (x - mean);
        out[i] = std::sqrt(ss / static_cast<double>(window - ddof));
    }
    return out;
}

VolatilitySeries rolling_volatility(const ReturnSeries& returns, std::span<const double> reference_weights,
                                    const VolatilityOptions& options) {
    if (options.window < 2) throw ValidationError("window must be >= 2");
    auto rp = portfolio_returns(returns, reference_weights);
    if (options.kind == ReturnKind::Log)
        for (auto& r : rp) r = std::log1p(r);

    VolatilitySeries out;
    out.window = options.window;
    out.values = rolling_stdev(rp, options.window, options.ddof);
    out.dates.assign(returns.dates.begin() + (options.window - 1), returns.dates.end());
    return out;
}

}  // namespace regimealloc
