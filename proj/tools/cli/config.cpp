#include "config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "regimealloc/error.hpp"

namespace regimealloc::cli {

using nlohmann::json;

namespace {

template <class T>
void take(const json& j, const char* key, T& field) {
    if (!j.contains(key)) return;
    try {
        field = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config key '") + key + "': " + e.what());
    }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError("config: " + what);
}

}  // namespace

void RunConfig::validate() const {
    require(window >= 2, "window must be >= 2");
    require(vol_ddof == 0 || vol_ddof == 1, "vol_ddof must be 0 or 1");
    require(return_kind == "simple" || return_kind == "log", "return_kind must be simple|log");
    require(k >= 1, "k must be >= 1");
    require(kmeans_max_iters >= 1, "kmeans_max_iters must be >= 1");
    require(kmeans_tol > 0.0, "kmeans_tol must be > 0");
    require(kmeans_n_init >= 1, "kmeans_n_init must be >= 1");
    require(prior_alpha > 0.0, "prior_alpha must be > 0");
    require(gibbs_chains >= 2, "n_chains ≥ 2 required for PSRF");
    require(gibbs_iters >= 1, "gibbs_iters must be >= 1");
    require(effective_burn_in() >= 0 && effective_burn_in() < gibbs_iters, "gibbs_burn_in must be in [0, gibbs_iters)");
    require(gibbs_iters - effective_burn_in() >= 10, "at least 10 retained Gibbs draws required for PSRF");
    require(batch_months >= 1, "batch_months must be >= 1");
    require(matrix_source == "gibbs" || matrix_source == "analytic", "matrix_source must be gibbs|analytic");
    require(epsilon > 0.0 && epsilon < 1.0, "epsilon must be in (0, 1)");
    require(metrics_ddof == 0 || metrics_ddof == 1, "metrics_ddof must be 0 or 1");
    require(blend_mode == "blend" || blend_mode == "argmax", "blend_mode must be blend|argmax");
    require(refit_months >= 0, "refit_months must be >= 0");
    for (double w : reference_weights) require(std::isfinite(w), "reference_weights must be finite");
}

void to_json(json& j, const RunConfig& c) {
    j = json{{"data", c.data},
             {"date_column", c.date_column},
             {"reference_weights", c.reference_weights},
             {"window", c.window},
             {"vol_ddof", c.vol_ddof},
             {"return_kind", c.return_kind},
             {"k", c.k},
             {"kmeans_max_iters", c.kmeans_max_iters},
             {"kmeans_tol", c.kmeans_tol},
             {"kmeans_seed", c.kmeans_seed},
             {"kmeans_n_init", c.kmeans_n_init},
             {"prior_alpha", c.prior_alpha},
             {"gibbs_chains", c.gibbs_chains},
             {"gibbs_iters", c.gibbs_iters},
             {"gibbs_burn_in", c.gibbs_burn_in},
             {"gibbs_seed", c.gibbs_seed},
             {"batch_months", c.batch_months},
             {"matrix_source", c.matrix_source},
             {"epsilon", c.epsilon},
             {"risk_free_rate", c.risk_free_rate},
             {"metrics_ddof", c.metrics_ddof},
             {"blend_mode", c.blend_mode},
             {"refit_months", c.refit_months},
             {"solver_seed", c.solver_seed},
             {"output_dir", c.output_dir},
             {"allow_unconverged", c.allow_unconverged}};
}

void merge_json(RunConfig& c, const json& j) {
    if (!j.is_object()) throw ValidationError("config: top level must be an object");
    json known;
    to_json(known, c);
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ValidationError("config: unknown key '" + key + "'");

    take(j, "data", c.data);
    take(j, "date_column", c.date_column);
    take(j, "reference_weights", c.reference_weights);
    take(j, "window", c.window);
    take(j, "vol_ddof", c.vol_ddof);
    take(j, "return_kind", c.return_kind);
    take(j, "k", c.k);
    take(j, "kmeans_max_iters", c.kmeans_max_iters);
    take(j, "kmeans_tol", c.kmeans_tol);
    take(j, "kmeans_seed", c.kmeans_seed);
    take(j, "kmeans_n_init", c.kmeans_n_init);
    take(j, "prior_alpha", c.prior_alpha);
    take(j, "gibbs_chains", c.gibbs_chains);
    take(j, "gibbs_iters", c.gibbs_iters);
    take(j, "gibbs_burn_in", c.gibbs_burn_in);
    take(j, "gibbs_seed", c.gibbs_seed);
    take(j, "batch_months", c.batch_months);
    take(j, "matrix_source", c.matrix_source);
    take(j, "epsilon", c.epsilon);
    take(j, "risk_free_rate", c.risk_free_rate);
    take(j, "metrics_ddof", c.metrics_ddof);
    take(j, "blend_mode", c.blend_mode);
    take(j, "refit_months", c.refit_months);
    take(j, "solver_seed", c.solver_seed);
    take(j, "output_dir", c.output_dir);
    take(j, "allow_unconverged", c.allow_unconverged);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("config '" + path.string() + "': " + e.what());
    }
    RunConfig c;
    merge_json(c, j);
    return c;
}

std::filesystem::path resolve_output_dir(const RunConfig& c) {
    if (!c.output_dir.empty()) return c.output_dir;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return "regimealloc-out";
}

}  // namespace regimealloc::cli
