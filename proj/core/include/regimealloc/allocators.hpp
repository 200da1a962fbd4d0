#pragma once

/**
 * @file allocators.hpp
 * @brief Static long-only allocators over a daily covariance matrix:
 * equal weight, minimum variance, maximum diversification and equal risk
 * contribution.
 *
 * Minimum variance and maximum diversification are both solved as the
 * convex quadratic program
 *
 *     min  1/2 y' Q y   s.t.  a' y = 1,  y >= 0
 *
 * by a primal active-set method (a = 1 for minimum variance; a = sigma for
 * maximum diversification, after which w = y / sum(y)). ERC is solved by
 * Newton's method on the strictly convex problem
 *
 *     min  1/2 y' Sigma y - (1/n) sum log y_i,
 *
 * whose unique minimiser, rescaled onto the simplex, equalises w_i (Sigma w)_i.
 */

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "regimealloc/marketdata.hpp"

namespace regimealloc {

/// Declaration order is the tie-break order used throughout.
enum class Method { ERC = 0, MinVar = 1, MaxDiv = 2, Equal = 3 };

inline constexpr std::array<Method, 4> kAllMethods{Method::ERC, Method::MinVar, Method::MaxDiv, Method::Equal};

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

class CovarianceMatrix {
public:
    /// Validates symmetry, PSD-ness up to noise and a positive diagonal.
    explicit CovarianceMatrix(Eigen::MatrixXd sigma);

    const Eigen::MatrixXd& sigma() const noexcept { return sigma_; }
    const Eigen::VectorXd& asset_vols() const noexcept { return vols_; }
    Eigen::Index size() const noexcept { return sigma_.rows(); }

private:
    Eigen::MatrixXd sigma_;
    Eigen::VectorXd vols_;
};

struct WeightVector {
    Eigen::VectorXd weights;
    Method method = Method::Equal;
};

struct AllocationDiagnostics {
    double objective_value = 0.0;
    int iterations = 0;
    double constraint_residual = 0.0;
    Eigen::VectorXd trc;
    double dr = 0.0;
    double regularization = 0.0;  ///< ridge added to the diagonal, 0 if none
    int start_index = 0;          ///< winning start for multi-start solvers
};

struct Allocation {
    WeightVector weights;
    AllocationDiagnostics diagnostics;
};

struct SolverOptions {
    int max_iters = 500;
    double tol = 1e-14;
    std::uint64_t seed = 11;  ///< random ERC starts
};

double portfolio_variance(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma);
/// w_i (Sigma w)_i
Eigen::VectorXd risk_contributions(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma);
/// sum_i w_i sigma_i / sqrt(w' Sigma w)
double diversification_ratio(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma);
/// sum_i (TRC_i - mean TRC)^2
double erc_objective(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma);

WeightVector equal_weight(std::size_t n);

/// Sigma^{-1} 1 / (1' Sigma^{-1} 1). May contain negative weights.
WeightVector min_variance_closed_form(const CovarianceMatrix& cov);

Allocation min_variance_constrained(const CovarianceMatrix& cov, const SolverOptions& opts = {});
Allocation max_diversification(const CovarianceMatrix& cov, const SolverOptions& opts = {});
Allocation erc(const CovarianceMatrix& cov, const SolverOptions& opts = {});

/// Dispatches by method; Equal gets exact 1/n with diagnostics filled in.
Allocation allocate(Method m, const CovarianceMatrix& cov, const SolverOptions& opts = {});

/// Sample covariance (divisor n - 1) over `rows` of the return matrix, all rows
/// when empty. Throws DegenerateAssetError for a zero-variance asset.
CovarianceMatrix estimate_covariance(const ReturnSeries& returns, std::span<const std::size_t> rows = {});
CovarianceMatrix estimate_covariance(const Eigen::MatrixXd& returns, std::span<const std::size_t> rows = {});

}  // namespace regimealloc
