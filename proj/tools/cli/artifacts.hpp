#pragma once

// JSON/CSV encodings of every persisted artifact, plus atomic file output
// and content hashing for the run manifest. Floating-point values in JSON
// carry 15 significant digits; CSV values carry 17 so they round-trip
// exactly between stages.

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "json.hpp"
#include "regimealloc/regimealloc.hpp"

namespace regimealloc::cli {

using nlohmann::json;

/// Rounds to 15 significant digits; non-finite values become null.
json number(double v);
json vector_json(const Eigen::VectorXd& v);
json matrix_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);

json load_report_json(const LoadReport& r);

json regime_model_json(const RegimeModel& m);
RegimeModel regime_model_from_json(const json& j);

struct TransitionArtifact {
    DirichletPrior prior;
    TransitionCounts counts;  ///< pooled over all batches
    PosteriorTransitionMatrix posterior;
    std::size_t batches = 0;
    std::string source;  ///< gibbs | analytic
    std::optional<GibbsRun> run;  ///< summary and PSRF only are serialised
};
json transitions_json(const TransitionArtifact& t);
/// The matrix used downstream (the `mean` entry).
Eigen::MatrixXd transition_matrix_from_json(const json& j);

json spectral_json(const SpectralSummary& s);

json allocation_json(const Allocation& a);
WeightVector weights_from_json(const json& j);

json assignment_json(const StateMethodAssignment& a);
json total_return_weights_json(const TotalReturnWeights& w);
json report_json(const PerformanceReport& r);

std::string prices_csv(const PriceSeries& p);
std::string returns_csv(const ReturnSeries& r);
ReturnSeries parse_returns_csv(std::string_view text, std::string_view source);
std::string volatility_csv(const VolatilitySeries& v);
std::string total_return_weights_csv(const TotalReturnWeights& w);
std::string yearly_csv(const PerformanceReport& r);
std::string totals_csv(const PerformanceReport& r);
std::string value_paths_csv(const BacktestLedger& l);

std::string read_file(const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);
/// Writes via a sibling temp file and rename.
void write_atomic(const std::filesystem::path& path, std::string_view content);
void write_json(const std::filesystem::path& path, const json& j);

std::string sha256_hex(std::string_view data);

}  // namespace regimealloc::cli
