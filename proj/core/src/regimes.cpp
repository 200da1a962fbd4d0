#include "regimealloc/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include "regimealloc/error.hpp"

namespace regimealloc {

namespace {

struct LloydState {
    std::vector<double> centroids;
    std::vector<int> labels;  // 0-based
    double wcss = 0.0;
    int iterations = 0;
    std::vector<double> trace;
};

int nearest(std::span<const double> centroids, double x) {
    int best = 0;
    double best_d = (x - centroids[0]) * (x - centroids[0]);
    for (std::size_t j = 1; j < centroids.size(); ++j) {
        const double d = (x - centroids[j]) * (x - centroids[j]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

double assign(std::span<const double> values, std::span<const double> centroids, std::vector<int>& labels) {
    double cost = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        labels[i] = nearest(centroids, values[i]);
        const double d = values[i] - centroids[static_cast<std::size_t>(labels[i])];
        cost += d * d;
    }
    return cost;
}

// Moves each empty centroid onto the point farthest from its own centroid,
// taken from a cluster that can spare it.
void repair_empty(std::span<const double> values, std::vector<double>& centroids, std::vector<int>& labels) {
    const auto k = centroids.size();
    std::vector<std::size_t> counts(k, 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (std::size_t j = 0; j < k; ++j) {
        if (counts[j] != 0) continue;
        std::size_t far = values.size();
        double far_d = -1.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto l = static_cast<std::size_t>(labels[i]);
            if (counts[l] < 2) continue;
            const double d = std::abs(values[i] - centroids[l]);
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far == values.size()) throw ComputationError("k-means: cannot repopulate an empty cluster");
        --counts[static_cast<std::size_t>(labels[far])];
        ++counts[j];
        labels[far] = static_cast<int>(j);
        centroids[j] = values[far];
    }
}

std::vector<double> means(std::span<const double> values, const std::vector<int>& labels, std::size_t k,
                          const std::vector<double>& fallback) {
    // Deviations are summed from each cluster's first member, which keeps constant clusters exact.
    std::vector<double> anchor(k, 0.0), sum(k, 0.0);
    std::vector<std::size_t> n(k, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto j = static_cast<std::size_t>(labels[i]);
        if (n[j]++ == 0) anchor[j] = values[i];
        sum[j] += values[i] - anchor[j];
    }
    std::vector<double> out(k);
    for (std::size_t j = 0; j < k; ++j) out[j] = n[j] ? anchor[j] + sum[j] / static_cast<double>(n[j]) : fallback[j];
    return out;
}

LloydState lloyd(std::span<const double> values, std::vector<double> init, const ClusterConfig& cfg) {
    LloydState s;
    s.centroids = std::move(init);
    s.labels.assign(values.size(), 0);
    const auto k = s.centroids.size();
    std::vector<int> previous;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        const double cost = assign(values, s.centroids, s.labels);
        s.trace.push_back(cost);
        repair_empty(values, s.centroids, s.labels);
        auto updated = means(values, s.labels, k, s.centroids);
        double shift = 0.0;
        for (std::size_t j = 0; j < k; ++j) shift = std::max(shift, std::abs(updated[j] - s.centroids[j]));
        s.centroids = std::move(updated);
        s.iterations = it;
        const bool stable = previous == s.labels;
        previous = s.labels;
        if (shift < cfg.tol || stable) break;
    }

    // Ascending order first so assignment ties resolve to the lower state.
    std::sort(s.centroids.begin(), s.centroids.end());
    assign(values, s.centroids, s.labels);
    repair_empty(values, s.centroids, s.labels);
    s.wcss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - s.centroids[static_cast<std::size_t>(s.labels[i])];
        s.wcss += d * d;
    }
    return s;
}

RegimeModel canonical(LloydState s, std::uint64_t seed) {
    const auto k = s.centroids.size();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.centroids[a] < s.centroids[b]; });
    std::vector<int> rank(k);
    for (std::size_t r = 0; r < k; ++r) rank[order[r]] = static_cast<int>(r);

    RegimeModel m;
    m.centroids.resize(k);
    for (std::size_t r = 0; r < k; ++r) m.centroids[r] = s.centroids[order[r]];
    m.labels.resize(s.labels.size());
    for (std::size_t i = 0; i < s.labels.size(); ++i) m.labels[i] = rank[static_cast<std::size_t>(s.labels[i])] + 1;
    m.wcss = s.wcss;
    m.iterations_run = s.iterations;
    m.wcss_trace = std::move(s.trace);
    m.seed = seed;
    return m;
}

void check_values(std::span<const double> values, int k) {
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("k-means: non-finite input value");
    std::vector<double> distinct(values.begin(), values.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < static_cast<std::size_t>(k))
        throw ValidationError("k-means: " + std::to_string(distinct.size()) + " distinct points for k = " +
                              std::to_string(k));
}

}  // namespace

void ClusterConfig::validate() const {
    if (k < 1) throw ValidationError("k must be >= 1");
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (!(tol > 0.0)) throw ValidationError("tol must be > 0");
    if (n_init < 1) throw ValidationError("n_init must be >= 1");
}

double wcss(std::span<const double> values, std::span<const double> centroids, std::span<const int> labels) {
    if (values.size() != labels.size()) throw ValidationError("wcss: values/labels length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const int l = labels[i];
        if (l < 1 || static_cast<std::size_t>(l) > centroids.size()) throw ValidationError("wcss: label out of range");
        const double d = values[i] - centroids[static_cast<std::size_t>(l - 1)];
        total += d * d;
    }
    return total;
}

RegimeModel kmeans_from(std::span<const double> values, std::span<const double> initial_centroids,
                        const ClusterConfig& cfg) {
    cfg.validate();
    if (initial_centroids.size() != static_cast<std::size_t>(cfg.k))
        throw ValidationError("k-means: expected " + std::to_string(cfg.k) + " initial centroids");
    check_values(values, cfg.k);
    return canonical(lloyd(values, {initial_centroids.begin(), initial_centroids.end()}, cfg), cfg.seed);
}

RegimeModel kmeans_fit(std::span<const double> values, const ClusterConfig& cfg) {
    cfg.validate();
    check_values(values, cfg.k);

    std::vector<double> distinct(values.begin(), values.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    auto restart = [&](int index) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(index)};
        std::mt19937_64 rng(seq);
        std::vector<double> init;
        init.reserve(static_cast<std::size_t>(cfg.k));
        std::sample(distinct.begin(), distinct.end(), std::back_inserter(init), cfg.k, rng);
        std::shuffle(init.begin(), init.end(), rng);
        return lloyd(values, std::move(init), cfg);
    };

    std::vector<std::future<LloydState>> jobs;
    jobs.reserve(static_cast<std::size_t>(cfg.n_init));
    for (int r = 0; r < cfg.n_init; ++r) jobs.push_back(std::async(std::launch::async, restart, r));

    LloydState best;
    bool have = false;
    for (auto& job : jobs) {
        auto s = job.get();
        if (!have || s.wcss < best.wcss) {
            best = std::move(s);
            have = true;
        }
    }
    return canonical(std::move(best), cfg.seed);
}

RegimeModel kmeans_fit(const VolatilitySeries& vol, const ClusterConfig& cfg) {
    auto m = kmeans_fit(std::span<const double>(vol.values), cfg);
    m.dates = vol.dates;
    return m;
}

int assign_state(const RegimeModel& model, double vol_value) {
    if (!std::isfinite(vol_value)) throw ValidationError("assign_state: non-finite volatility");
    if (vol_value < 0.0) throw ValidationError("assign_state: negative volatility");
    if (model.centroids.empty()) throw ValidationError("assign_state: model not fitted");
    return nearest(model.centroids, vol_value) + 1;
}

}  // namespace regimealloc
