#pragma once

/**
 * @file transitions.hpp
 * @brief Bayesian estimate of the state-transition matrix.
 *
 * Each row P_i of the transition matrix carries an independent Dirichlet
 * prior. Observed transition counts update it conjugately, so the posterior
 * of row i is Dirichlet(alpha_i + N_i) and its mean is available in closed
 * form. The Gibbs sampler draws whole rows from those conditionals and is
 * checked against the closed-form mean; Gelman-Rubin PSRF gates convergence.
 *
 * States are 1-based at the API boundary and 0-based inside matrices.
 */

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace regimealloc {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct DirichletPrior {
    Eigen::MatrixXd alpha;  ///< k x k, every entry > 0

    static DirichletPrior uniform(int k, double value = 1.0);
    int k() const noexcept { return static_cast<int>(alpha.rows()); }
    void validate() const;
};

struct TransitionCounts {
    CountMatrix counts;

    int k() const noexcept { return static_cast<int>(counts.rows()); }
    std::int64_t total() const noexcept { return counts.sum(); }
    TransitionCounts& operator+=(const TransitionCounts& other);
};

TransitionCounts operator+(TransitionCounts a, const TransitionCounts& b);

struct SampleSummary {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd stdev;
    std::size_t draws = 0;  ///< retained draws pooled across chains
};

struct PosteriorTransitionMatrix {
    Eigen::MatrixXd mean;             ///< row-stochastic
    Eigen::MatrixXd posterior_alpha;  ///< alpha + N
    std::optional<SampleSummary> samples_summary;

    int k() const noexcept { return static_cast<int>(mean.rows()); }
};

/// N_ij = number of t with labels[t] = i and labels[t+1] = j. Labels are 1..k.
TransitionCounts count_transitions(std::span<const int> labels, int k);

/// Closed-form posterior mean (alpha_ij + N_ij) / sum_l (alpha_il + N_il).
PosteriorTransitionMatrix posterior_mean(const DirichletPrior& prior, const TransitionCounts& counts);

/// The posterior after `counts`, usable as the prior for the next batch.
DirichletPrior updated_prior(const DirichletPrior& prior, const TransitionCounts& counts);

struct GibbsConfig {
    int n_chains = 4;
    int n_iters = 5000;
    int burn_in = 1000;
    std::uint64_t seed = 7;

    /// Burn-in at the conventional 20% of iterations.
    static GibbsConfig with_default_burn_in(int n_chains, int n_iters, std::uint64_t seed);
    void validate() const;
};

struct PsrfResult {
    Eigen::MatrixXd psrf;
    bool converged = false;
    double max_psrf = 0.0;
    static constexpr double threshold = 1.1;
};

struct GibbsRun {
    /// chains[c][d] is the d-th retained draw of chain c.
    std::vector<std::vector<Eigen::MatrixXd>> chains;
    int n_chains = 0;
    int n_iters = 0;
    int burn_in = 0;
    std::uint64_t seed = 0;
    SampleSummary summary;
    PsrfResult psrf;

    std::size_t retained_per_chain() const { return chains.empty() ? 0 : chains.front().size(); }
};

/**
 * Blocked Gibbs sampler over the rows of the transition matrix.
 *
 * Count batches are folded in one at a time during burn-in, mimicking a
 * posterior that is refreshed once per period; from the end of burn-in on,
 * every batch is active and draws target Dirichlet(alpha_i + sum_b N_i^b)
 * row by row. Chains run concurrently with RNG streams derived from
 * (seed, chain index), so results never depend on scheduling.
 */
GibbsRun gibbs_sample(const DirichletPrior& prior, std::span<const TransitionCounts> count_batches,
                      const GibbsConfig& cfg);

/// Per-entry potential scale reduction factor over the retained draws of `run`.
PsrfResult gelman_rubin(const GibbsRun& run);

/// Scalar PSRF for m >= 2 chains of equal length n >= 2.
/// Returns +inf when within-chain variance is zero but chains disagree,
/// and 1 when every draw is identical.
double psrf(const std::vector<std::vector<double>>& chains);

/// Posterior built from the pooled Gibbs sample mean.
PosteriorTransitionMatrix posterior_from_gibbs(const DirichletPrior& prior, const TransitionCounts& pooled,
                                               const GibbsRun& run);

/// Rescales every row to sum to one. Used to clean rounded published matrices.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m);

}  // namespace regimealloc
