#pragma once

// Stationary distribution, SLEM and mixing-time estimates for a finite
// row-stochastic transition matrix.

#include <vector>

#include <Eigen/Dense>

namespace regimealloc {

struct SpectralSummary {
    std::vector<double> eigen_moduli;  ///< descending
    double slem = 0.0;
    double t_rel = 0.0;
    Eigen::VectorXd stationary;
    double pi_min = 0.0;
    double epsilon = 0.01;
    double lower_bound = 0.0;
    double upper_bound = 0.0;
    long point_estimate = 0;
    bool reversible = false;
    double detailed_balance_residual = 0.0;
    /// True when the [lower, upper] interval is only guaranteed for reversible chains
    /// and this chain is not reversible.
    bool bounds_reversible_only = false;
};

/// Throws ValidationError unless every entry is >= 0 and rows sum to 1 within `tol`.
void check_row_stochastic(const Eigen::MatrixXd& p, double tol = 1e-9);

/// Strongly connected over the positive-entry digraph.
bool is_irreducible(const Eigen::MatrixXd& p);

/// Period of state 0; 1 means aperiodic when the chain is irreducible.
int period(const Eigen::MatrixXd& p);

/// Left fixed vector pi P = pi, normalised to sum 1.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p);

/// Second-largest eigenvalue modulus. Throws ComputationError if it is 1
/// (reducible or periodic chain) or the leading modulus is not 1.
double slem(const Eigen::MatrixXd& p);

/// Eigenvalue moduli of P sorted descending (complex moduli included).
std::vector<double> eigen_moduli(const Eigen::MatrixXd& p);

/// max |pi_i P_ij - pi_j P_ji|.
double detailed_balance_residual(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi);

/// Eigenvalues of D^{1/2} P D^{-1/2} with D = diag(pi), ascending. For a
/// reversible chain this matrix is symmetric and its spectrum is real.
Eigen::VectorXd symmetrized_eigenvalues(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi);

/// ceil(ln(1/eps) / -ln(slem)), clamped to at least one step.
long mixing_point_estimate(double slem, double epsilon);

double relaxation_time(double slem);
double mixing_lower_bound(double t_rel, double epsilon);
double mixing_upper_bound(double t_rel, double pi_min, double epsilon);

SpectralSummary mixing_analysis(const Eigen::MatrixXd& p, double epsilon = 0.01);

}  // namespace regimealloc
