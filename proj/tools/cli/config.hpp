#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace regimealloc::cli {

/// Every knob of a run. Precedence when building one: flags > config file > defaults.
struct RunConfig {
    std::vector<std::string> data;  ///< price CSVs, inner-joined on date
    std::string date_column = "date";
    std::vector<double> reference_weights;  ///< empty = equal weight
    int window = 22;
    int vol_ddof = 1;
    std::string return_kind = "simple";  ///< simple | log

    int k = 10;
    int kmeans_max_iters = 300;
    double kmeans_tol = 1e-10;
    std::uint64_t kmeans_seed = 42;
    int kmeans_n_init = 10;

    double prior_alpha = 1.0;
    int gibbs_chains = 4;
    int gibbs_iters = 5000;
    int gibbs_burn_in = -1;  ///< -1 = 20% of iterations
    std::uint64_t gibbs_seed = 7;
    int batch_months = 6;
    std::string matrix_source = "gibbs";  ///< gibbs | analytic

    double epsilon = 0.01;
    double risk_free_rate = 0.01;
    int metrics_ddof = 1;
    std::string blend_mode = "blend";  ///< blend | argmax
    int refit_months = 0;              ///< 0 = fit once on the full period
    std::uint64_t solver_seed = 11;

    std::string output_dir;
    bool allow_unconverged = false;

    int effective_burn_in() const { return gibbs_burn_in < 0 ? gibbs_iters / 5 : gibbs_burn_in; }

    /// Throws ValidationError naming the offending key.
    void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Overlays keys present in `j` onto `c`; unknown keys are rejected.
void merge_json(RunConfig& c, const nlohmann::json& j);

RunConfig load_config(const std::filesystem::path& path);

/// Environment variable consulted when no output directory is configured.
inline constexpr const char* kOutputEnv = "REGIMEALLOC_OUTPUT_DIR";

std::filesystem::path resolve_output_dir(const RunConfig& c);

}  // namespace regimealloc::cli
