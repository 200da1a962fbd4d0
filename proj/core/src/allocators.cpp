#include "regimealloc/allocators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "regimealloc/error.hpp"

namespace regimealloc {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kPsdTol = 1e-10;
constexpr double kRidgeFactor = 1e-10;

// Ridge applied when the smallest eigenvalue is within the ridge size of zero.
double ridge_for(const Eigen::MatrixXd& q) {
    const double scale = q.trace() / static_cast<double>(q.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    return min_eig <= kRidgeFactor * scale ? kRidgeFactor * scale : 0.0;
}

struct QpResult {
    Eigen::VectorXd y;
    int iterations = 0;
};

// Primal active-set method for min 1/2 y'Qy s.t. a'y = 1, y >= 0 with a > 0
// and Q positive definite.
QpResult simplex_qp(const Eigen::MatrixXd& q, const Eigen::VectorXd& a, const SolverOptions& opts) {
    const auto n = q.rows();
    std::vector<bool> free(static_cast<std::size_t>(n), false);

    Eigen::Index start = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = q(i, i) / (a(i) * a(i));
        if (v < best) {
            best = v;
            start = i;
        }
    }
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    y(start) = 1.0 / a(start);
    free[static_cast<std::size_t>(start)] = true;

    QpResult out;
    for (int it = 1; it <= opts.max_iters; ++it) {
        out.iterations = it;
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < n; ++i)
            if (free[static_cast<std::size_t>(i)]) idx.push_back(i);
        const auto m = static_cast<Eigen::Index>(idx.size());

        Eigen::MatrixXd qf(m, m);
        Eigen::VectorXd af(m);
        for (Eigen::Index r = 0; r < m; ++r) {
            af(r) = a(idx[static_cast<std::size_t>(r)]);
            for (Eigen::Index c = 0; c < m; ++c) qf(r, c) = q(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(qf);
        if (ldlt.info() != Eigen::Success) throw ComputationError("active-set QP: singular reduced system");
        Eigen::VectorXd z = ldlt.solve(af);
        Eigen::VectorXd target = z / af.dot(z);

        if ((target.array() >= 0.0).all()) {
            y.setZero();
            for (Eigen::Index r = 0; r < m; ++r) y(idx[static_cast<std::size_t>(r)]) = target(r);
            const Eigen::VectorXd g = q * y;
            const double lambda = y.dot(g);
            Eigen::Index enter = -1;
            double worst = -opts.tol * std::max(lambda, std::numeric_limits<double>::min()) * 1e2;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (free[static_cast<std::size_t>(j)]) continue;
                const double mu = (g(j) - lambda * a(j)) / a(j);
                if (mu < worst) {
                    worst = mu;
                    enter = j;
                }
            }
            if (enter < 0) {
                out.y = y;
                return out;
            }
            free[static_cast<std::size_t>(enter)] = true;
            continue;
        }

        // Step toward the target until the first free coordinate hits zero.
        double step = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index r = 0; r < m; ++r) {
            const auto i = idx[static_cast<std::size_t>(r)];
            if (target(r) < 0.0) {
                const double s = y(i) / (y(i) - target(r));
                if (s < step) {
                    step = s;
                    blocking = i;
                }
            }
        }
        for (Eigen::Index r = 0; r < m; ++r) {
            const auto i = idx[static_cast<std::size_t>(r)];
            y(i) += step * (target(r) - y(i));
        }
        if (blocking >= 0) {
            y(blocking) = 0.0;
            free[static_cast<std::size_t>(blocking)] = false;
        }
    }
    throw ComputationError("active-set QP did not converge in " + std::to_string(opts.max_iters) + " iterations");
}

struct NewtonResult {
    Eigen::VectorXd w;
    int iterations = 0;
};

// Newton's method on 1/2 y'Sy - (1/n) sum log y.
NewtonResult erc_newton(const Eigen::MatrixXd& s, const Eigen::VectorXd& w0, const SolverOptions& opts) {
    const auto n = s.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::VectorXd y = w0 / std::sqrt(w0.dot(s * w0));

    auto f = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(s * v) - inv_n * v.array().log().sum(); };

    NewtonResult out;
    for (int it = 1; it <= opts.max_iters; ++it) {
        out.iterations = it;
        const Eigen::VectorXd grad = s * y - (inv_n / y.array()).matrix();
        Eigen::MatrixXd hess = s;
        hess.diagonal().array() += inv_n / y.array().square();
        Eigen::LLT<Eigen::MatrixXd> llt(hess);
        if (llt.info() != Eigen::Success) throw ComputationError("ERC: Hessian not positive definite");
        const Eigen::VectorXd step = -llt.solve(grad);
        const double decrement = -grad.dot(step);
        if (decrement < 2.0 * opts.tol * opts.tol) break;

        double t = 1.0;
        while (((y + t * step).array() <= 0.0).any()) t *= 0.5;
        const double f0 = f(y);
        while (f(y + t * step) > f0 - 0.25 * t * decrement && t > 1e-12) t *= 0.5;
        if (t <= 1e-12) break;  // no further progress at working precision
        y += t * step;
    }
    out.w = y / y.sum();
    return out;
}

void fill_diagnostics(AllocationDiagnostics& d, const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma) {
    d.trc = risk_contributions(w, sigma);
    d.dr = diversification_ratio(w, sigma);
    d.constraint_residual = std::max(std::abs(w.sum() - 1.0), std::max(0.0, -w.minCoeff()));
}

Eigen::MatrixXd regularized(const CovarianceMatrix& cov, double& ridge) {
    ridge = ridge_for(cov.sigma());
    Eigen::MatrixXd q = cov.sigma();
    q.diagonal().array() += ridge;
    return q;
}

}  // namespace

std::string_view to_string(Method m) {
    switch (m) {
        case Method::ERC: return "ERC";
        case Method::MinVar: return "MinVar";
        case Method::MaxDiv: return "MaxDiv";
        case Method::Equal: return "Equal";
    }
    return "?";
}

Method method_from_string(std::string_view name) {
    for (auto m : kAllMethods)
        if (to_string(m) == name) return m;
    if (name == "Min_Var") return Method::MinVar;
    if (name == "Max_Div") return Method::MaxDiv;
    throw ValidationError("unknown method '" + std::string(name) + "'");
}

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd sigma) : sigma_(std::move(sigma)) {
    if (sigma_.rows() != sigma_.cols() || sigma_.rows() == 0) throw ValidationError("covariance must be square");
    if (!sigma_.allFinite()) throw ValidationError("covariance has non-finite entries");
    const double scale = std::max(1.0, sigma_.cwiseAbs().maxCoeff());
    if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
        throw ValidationError("covariance is not symmetric");
    for (Eigen::Index i = 0; i < sigma_.rows(); ++i)
        if (!(sigma_(i, i) > 0.0))
            throw DegenerateAssetError(static_cast<std::size_t>(i),
                                       "zero-variance asset at index " + std::to_string(i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kPsdTol * scale) throw ValidationError("covariance is not positive semidefinite");
    vols_ = sigma_.diagonal().cwiseSqrt();
}

double portfolio_variance(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma) { return w.dot(sigma * w); }

Eigen::VectorXd risk_contributions(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma) {
    return w.cwiseProduct(sigma * w);
}

double diversification_ratio(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma) {
    return w.dot(sigma.diagonal().cwiseSqrt()) / std::sqrt(portfolio_variance(w, sigma));
}

double erc_objective(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma) {
    const Eigen::VectorXd trc = risk_contributions(w, sigma);
    return (trc.array() - trc.mean()).square().sum();
}

WeightVector equal_weight(std::size_t n) {
    if (n == 0) throw ValidationError("equal_weight: n must be >= 1");
    const auto size = static_cast<Eigen::Index>(n);
    return {Eigen::VectorXd::Constant(size, 1.0 / static_cast<double>(n)), Method::Equal};
}

WeightVector min_variance_closed_form(const CovarianceMatrix& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov.sigma());
    if (llt.info() != Eigen::Success) throw ComputationError("min_variance_closed_form: covariance is not positive definite");
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(cov.size());
    const Eigen::VectorXd x = llt.solve(ones);
    const double denom = ones.dot(x);
    if (!(denom > 0.0) || !x.allFinite()) throw ComputationError("min_variance_closed_form: singular covariance");
    return {x / denom, Method::MinVar};
}

Allocation min_variance_constrained(const CovarianceMatrix& cov, const SolverOptions& opts) {
    Allocation out;
    auto& d = out.diagnostics;
    const Eigen::MatrixXd q = regularized(cov, d.regularization);
    auto qp = simplex_qp(q, Eigen::VectorXd::Ones(cov.size()), opts);
    Eigen::VectorXd w = qp.y / qp.y.sum();
    out.weights = {w, Method::MinVar};
    d.iterations = qp.iterations;
    d.objective_value = portfolio_variance(w, cov.sigma());
    fill_diagnostics(d, w, cov.sigma());
    return out;
}

Allocation max_diversification(const CovarianceMatrix& cov, const SolverOptions& opts) {
    Allocation out;
    auto& d = out.diagnostics;
    const Eigen::MatrixXd q = regularized(cov, d.regularization);
    auto qp = simplex_qp(q, cov.asset_vols(), opts);
    Eigen::VectorXd w = qp.y / qp.y.sum();
    out.weights = {w, Method::MaxDiv};
    d.iterations = qp.iterations;
    fill_diagnostics(d, w, cov.sigma());
    d.objective_value = d.dr;
    return out;
}

Allocation erc(const CovarianceMatrix& cov, const SolverOptions& opts) {
    Allocation out;
    auto& d = out.diagnostics;
    const Eigen::MatrixXd q = regularized(cov, d.regularization);
    const auto n = cov.size();

    std::vector<Eigen::VectorXd> starts;
    starts.push_back(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
    Eigen::VectorXd inv_vol = cov.asset_vols().cwiseInverse();
    starts.push_back(inv_vol / inv_vol.sum());
    Eigen::VectorXd inv_var = cov.sigma().diagonal().cwiseInverse();
    starts.push_back(inv_var / inv_var.sum());
    std::mt19937_64 rng(opts.seed);
    std::exponential_distribution<double> expo(1.0);
    for (int r = 0; r < 2; ++r) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = expo(rng) + 1e-3;
        starts.push_back(v / v.sum());
    }

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < starts.size(); ++s) {
        auto res = erc_newton(q, starts[s], opts);
        const double obj = erc_objective(res.w, cov.sigma());
        if (obj < best) {
            best = obj;
            out.weights = {res.w, Method::ERC};
            d.iterations = res.iterations;
            d.start_index = static_cast<int>(s);
        }
    }
    if (!std::isfinite(best)) throw ComputationError("ERC: no start converged");
    d.objective_value = best;
    fill_diagnostics(d, out.weights.weights, cov.sigma());
    return out;
}

Allocation allocate(Method m, const CovarianceMatrix& cov, const SolverOptions& opts) {
    switch (m) {
        case Method::ERC: return erc(cov, opts);
        case Method::MinVar: return min_variance_constrained(cov, opts);
        case Method::MaxDiv: return max_diversification(cov, opts);
        case Method::Equal: {
            Allocation out;
            out.weights = equal_weight(static_cast<std::size_t>(cov.size()));
            out.diagnostics.objective_value = portfolio_variance(out.weights.weights, cov.sigma());
            fill_diagnostics(out.diagnostics, out.weights.weights, cov.sigma());
            return out;
        }
    }
    throw ValidationError("allocate: unknown method");
}

CovarianceMatrix estimate_covariance(const Eigen::MatrixXd& returns, std::span<const std::size_t> rows) {
    Eigen::MatrixXd x;
    if (rows.empty()) {
        x = returns;
    } else {
        x.resize(static_cast<Eigen::Index>(rows.size()), returns.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r] >= static_cast<std::size_t>(returns.rows()))
                throw ValidationError("estimate_covariance: row index out of range");
            x.row(static_cast<Eigen::Index>(r)) = returns.row(static_cast<Eigen::Index>(rows[r]));
        }
    }
    const auto m = x.rows();
    const auto n = x.cols();
    if (m < n + 1)
        throw ValidationError("estimate_covariance: " + std::to_string(m) + " rows for " + std::to_string(n) +
                              " assets (need at least " + std::to_string(n + 1) + ")");
    for (Eigen::Index j = 0; j < n; ++j)
        if (x.col(j).maxCoeff() == x.col(j).minCoeff())
            throw DegenerateAssetError(static_cast<std::size_t>(j),
                                       "zero-variance asset at column " + std::to_string(j));
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    Eigen::MatrixXd c = (centered.transpose() * centered) / static_cast<double>(m - 1);
    return CovarianceMatrix(0.5 * (c + c.transpose()));
}

CovarianceMatrix estimate_covariance(const ReturnSeries& returns, std::span<const std::size_t> rows) {
    return estimate_covariance(returns.returns, rows);
}

}  // namespace regimealloc
