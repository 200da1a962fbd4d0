#include "regimealloc/transitions.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <string>

#include "regimealloc/error.hpp"

namespace regimealloc {

DirichletPrior DirichletPrior::uniform(int k, double value) {
    if (k < 1) throw ValidationError("prior: k must be >= 1");
    DirichletPrior p{Eigen::MatrixXd::Constant(k, k, value)};
    p.validate();
    return p;
}

void DirichletPrior::validate() const {
    if (alpha.rows() != alpha.cols() || alpha.rows() == 0) throw ValidationError("prior: alpha must be square k x k");
    if (!alpha.allFinite() || (alpha.array() <= 0.0).any())
        throw ValidationError("prior: every concentration must be > 0");
}

TransitionCounts& TransitionCounts::operator+=(const TransitionCounts& other) {
    if (other.counts.rows() != counts.rows() || other.counts.cols() != counts.cols())
        throw ValidationError("transition counts: dimension mismatch");
    counts += other.counts;
    return *this;
}

TransitionCounts operator+(TransitionCounts a, const TransitionCounts& b) {
    a += b;
    return a;
}

TransitionCounts count_transitions(std::span<const int> labels, int k) {
    if (k < 1) throw ValidationError("count_transitions: k must be >= 1");
    if (labels.size() < 2) throw ValidationError("count_transitions: need at least 2 labels");
    for (std::size_t t = 0; t < labels.size(); ++t)
        if (labels[t] < 1 || labels[t] > k)
            throw ValidationError("count_transitions: label " + std::to_string(labels[t]) + " at position " +
                                  std::to_string(t) + " outside 1.." + std::to_string(k));
    TransitionCounts out{CountMatrix::Zero(k, k)};
    for (std::size_t t = 0; t + 1 < labels.size(); ++t) ++out.counts(labels[t] - 1, labels[t + 1] - 1);
    return out;
}

DirichletPrior updated_prior(const DirichletPrior& prior, const TransitionCounts& counts) {
    prior.validate();
    if (counts.counts.rows() != prior.alpha.rows() || counts.counts.cols() != prior.alpha.cols())
        throw ValidationError("posterior: prior is " + std::to_string(prior.k()) + "x" + std::to_string(prior.k()) +
                              " but counts are " + std::to_string(counts.counts.rows()) + "x" +
                              std::to_string(counts.counts.cols()));
    if ((counts.counts.array() < 0).any()) throw ValidationError("posterior: negative transition count");
    return DirichletPrior{prior.alpha + counts.counts.cast<double>()};
}

PosteriorTransitionMatrix posterior_mean(const DirichletPrior& prior, const TransitionCounts& counts) {
    PosteriorTransitionMatrix out;
    out.posterior_alpha = updated_prior(prior, counts).alpha;
    out.mean = out.posterior_alpha.array().colwise() / out.posterior_alpha.rowwise().sum().array();
    return out;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m) {
    Eigen::VectorXd sums = m.rowwise().sum();
    if ((sums.array() <= 0.0).any()) throw ValidationError("normalize_rows: row with non-positive sum");
    return m.array().colwise() / sums.array();
}

GibbsConfig GibbsConfig::with_default_burn_in(int n_chains, int n_iters, std::uint64_t seed) {
    return GibbsConfig{n_chains, n_iters, n_iters / 5, seed};
}

void GibbsConfig::validate() const {
    if (n_chains < 2) throw ValidationError("n_chains ≥ 2 required for PSRF");
    if (n_iters < 1) throw ValidationError("n_iters must be >= 1");
    if (burn_in < 0 || burn_in >= n_iters) throw ValidationError("burn_in must satisfy 0 <= burn_in < n_iters");
}

namespace {

std::vector<Eigen::MatrixXd> run_chain(const Eigen::MatrixXd& alpha, const std::vector<Eigen::MatrixXd>& cumulative,
                                       const GibbsConfig& cfg, int chain) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(chain), 0x6a09e667u};
    std::mt19937_64 rng(seq);
    const auto k = alpha.rows();
    const auto batches = static_cast<int>(cumulative.size());

    std::vector<Eigen::MatrixXd> kept;
    kept.reserve(static_cast<std::size_t>(cfg.n_iters - cfg.burn_in));
    Eigen::MatrixXd current = Eigen::MatrixXd::Zero(k, k);

    for (int it = 0; it < cfg.n_iters; ++it) {
        int active = batches;
        if (it < cfg.burn_in && batches > 1)
            active = std::min(batches, 1 + static_cast<int>((static_cast<long long>(it) * batches) / cfg.burn_in));
        const Eigen::MatrixXd& counts = cumulative[static_cast<std::size_t>(active - 1)];

        for (Eigen::Index i = 0; i < k; ++i) {
            double total = 0.0;
            for (Eigen::Index j = 0; j < k; ++j) {
                std::gamma_distribution<double> gamma(alpha(i, j) + counts(i, j), 1.0);
                current(i, j) = gamma(rng);
                total += current(i, j);
            }
            if (!(total > 0.0)) throw ComputationError("gibbs: Dirichlet draw underflowed");
            current.row(i) /= total;
        }
        if (it >= cfg.burn_in) kept.push_back(current);
    }
    return kept;
}

}  // namespace

GibbsRun gibbs_sample(const DirichletPrior& prior, std::span<const TransitionCounts> count_batches,
                      const GibbsConfig& cfg) {
    prior.validate();
    cfg.validate();
    const auto k = prior.alpha.rows();

    // Running totals so batch b sees sum_{c <= b} N^c.
    std::vector<Eigen::MatrixXd> cumulative;
    Eigen::MatrixXd running = Eigen::MatrixXd::Zero(k, k);
    for (const auto& b : count_batches) {
        if (b.counts.rows() != k || b.counts.cols() != k) throw ValidationError("gibbs: count batch dimension mismatch");
        if ((b.counts.array() < 0).any()) throw ValidationError("gibbs: negative transition count");
        running += b.counts.cast<double>();
        cumulative.push_back(running);
    }
    if (cumulative.empty()) cumulative.push_back(running);

    std::vector<std::future<std::vector<Eigen::MatrixXd>>> jobs;
    for (int c = 0; c < cfg.n_chains; ++c)
        jobs.push_back(std::async(std::launch::async, run_chain, std::cref(prior.alpha), std::cref(cumulative),
                                  std::cref(cfg), c));

    GibbsRun run;
    run.n_chains = cfg.n_chains;
    run.n_iters = cfg.n_iters;
    run.burn_in = cfg.burn_in;
    run.seed = cfg.seed;
    for (auto& j : jobs) run.chains.push_back(j.get());

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(k, k);
    std::size_t n = 0;
    for (const auto& chain : run.chains)
        for (const auto& draw : chain) {
            sum += draw;
            sumsq += draw.cwiseProduct(draw);
            ++n;
        }
    run.summary.draws = n;
    run.summary.mean = sum / static_cast<double>(n);
    if (n > 1) {
        Eigen::MatrixXd var = (sumsq - sum.cwiseProduct(sum) / static_cast<double>(n)) / static_cast<double>(n - 1);
        run.summary.stdev = var.cwiseMax(0.0).cwiseSqrt();
    } else {
        run.summary.stdev = Eigen::MatrixXd::Zero(k, k);
    }

    if (run.retained_per_chain() >= 10) run.psrf = gelman_rubin(run);
    return run;
}

double psrf(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    if (m < 2) throw ValidationError("psrf: need at least 2 chains");
    const std::size_t n = chains.front().size();
    if (n < 2) throw ValidationError("psrf: need at least 2 draws per chain");
    for (const auto& c : chains)
        if (c.size() != n) throw ValidationError("psrf: chains must have equal length");
    const double first = chains.front().front();
    const auto constant = [&](const std::vector<double>& c) {
        return std::all_of(c.begin(), c.end(), [&](double x) { return x == first; });
    };
    if (std::all_of(chains.begin(), chains.end(), constant)) return 1.0;

    std::vector<double> means(m, 0.0);
    double w = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        double mu = 0.0;
        for (double x : chains[c]) mu += x;
        mu /= static_cast<double>(n);
        means[c] = mu;
        double ss = 0.0;
        for (double x : chains[c]) ss += (x - mu) * (x - mu);
        w += ss / static_cast<double>(n - 1);
    }
    w /= static_cast<double>(m);

    double grand = 0.0;
    for (double mu : means) grand += mu;
    grand /= static_cast<double>(m);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= static_cast<double>(n) / static_cast<double>(m - 1);

    if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double nn = static_cast<double>(n);
    const double var_plus = (nn - 1.0) / nn * w + b / nn;
    return std::sqrt(var_plus / w);
}

PsrfResult gelman_rubin(const GibbsRun& run) {
    if (run.chains.size() < 2) throw ValidationError("gelman_rubin: at least 2 chains required");
    const std::size_t n = run.retained_per_chain();
    if (n < 10) throw ValidationError("gelman_rubin: at least 10 retained draws per chain required");
    const auto k = run.chains.front().front().rows();

    PsrfResult out;
    out.psrf.resize(k, k);
    std::vector<std::vector<double>> scalar(run.chains.size(), std::vector<double>(n));
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) {
            for (std::size_t c = 0; c < run.chains.size(); ++c)
                for (std::size_t d = 0; d < n; ++d) scalar[c][d] = run.chains[c][d](i, j);
            out.psrf(i, j) = psrf(scalar);
        }
    out.max_psrf = out.psrf.maxCoeff();
    out.converged = out.max_psrf < PsrfResult::threshold;
    return out;
}

PosteriorTransitionMatrix posterior_from_gibbs(const DirichletPrior& prior, const TransitionCounts& pooled,
                                               const GibbsRun& run) {
    auto out = posterior_mean(prior, pooled);
    if (run.summary.mean.rows() != out.mean.rows()) throw ValidationError("posterior_from_gibbs: dimension mismatch");
    // The pooled sample mean is an average of stochastic rows; renormalise away rounding.
    out.mean = normalize_rows(run.summary.mean);
    out.samples_summary = run.summary;
    return out;
}

}  // namespace regimealloc
