#pragma once

// One-dimensional K-means over the volatility observable. States are
// 1-based and ordered by ascending centroid, so state 1 is always the
// calmest regime.

#include <cstdint>
#include <span>
#include <vector>

#include "regimealloc/marketdata.hpp"

namespace regimealloc {

struct ClusterConfig {
    int k = 10;
    int max_iters = 300;
    double tol = 1e-10;  ///< stop when the largest centroid shift falls below this
    std::uint64_t seed = 42;
    int n_init = 10;

    void validate() const;
};

struct RegimeModel {
    std::vector<double> centroids;  ///< ascending, size k
    std::vector<int> labels;        ///< one per observation, in 1..k
    std::vector<Date> dates;        ///< empty when fitted on raw values
    double wcss = 0.0;
    int iterations_run = 0;
    std::uint64_t seed = 0;
    /// WCSS after every assignment step of the winning restart.
    std::vector<double> wcss_trace;

    int k() const noexcept { return static_cast<int>(centroids.size()); }
};

RegimeModel kmeans_fit(std::span<const double> values, const ClusterConfig& cfg = {});
RegimeModel kmeans_fit(const VolatilitySeries& vol, const ClusterConfig& cfg = {});

/// Lloyd iterations from a caller-supplied set of initial centroids, no restarts.
/// The result is canonically relabelled like kmeans_fit.
RegimeModel kmeans_from(std::span<const double> values, std::span<const double> initial_centroids,
                        const ClusterConfig& cfg = {});

/// Nearest centroid, ties to the lower state. Returns a state in 1..k.
int assign_state(const RegimeModel& model, double vol_value);

/// Within-cluster sum of squares for arbitrary centroids and 1-based labels.
double wcss(std::span<const double> values, std::span<const double> centroids, std::span<const int> labels);

}  // namespace regimealloc
