#include "regimealloc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include <Eigen/Eigenvalues>

#include "regimealloc/error.hpp"

namespace regimealloc {

namespace {

constexpr double kUnitModulusTol = 1e-8;
constexpr double kReversibleTol = 1e-9;

std::vector<bool> reachable(const Eigen::MatrixXd& p, bool transpose) {
    const auto k = p.rows();
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    std::queue<Eigen::Index> todo;
    todo.push(0);
    seen[0] = true;
    while (!todo.empty()) {
        const auto u = todo.front();
        todo.pop();
        for (Eigen::Index v = 0; v < k; ++v) {
            const double w = transpose ? p(v, u) : p(u, v);
            if (w > 0.0 && !seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = true;
                todo.push(v);
            }
        }
    }
    return seen;
}

}  // namespace

void check_row_stochastic(const Eigen::MatrixXd& p, double tol) {
    if (p.rows() != p.cols() || p.rows() == 0) throw ValidationError("transition matrix must be square and non-empty");
    if (!p.allFinite()) throw ValidationError("transition matrix has non-finite entries");
    if ((p.array() < 0.0).any()) throw ValidationError("transition matrix has negative entries");
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double s = p.row(i).sum();
        if (std::abs(s - 1.0) > tol)
            throw ValidationError("row " + std::to_string(i + 1) + " sums to " + std::to_string(s) + ", not 1");
    }
}

bool is_irreducible(const Eigen::MatrixXd& p) {
    const auto fwd = reachable(p, false);
    const auto bwd = reachable(p, true);
    return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
           std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

int period(const Eigen::MatrixXd& p) {
    const auto k = p.rows();
    std::vector<long> level(static_cast<std::size_t>(k), -1);
    std::queue<Eigen::Index> todo;
    level[0] = 0;
    todo.push(0);
    long g = 0;
    while (!todo.empty()) {
        const auto u = todo.front();
        todo.pop();
        for (Eigen::Index v = 0; v < k; ++v) {
            if (!(p(u, v) > 0.0)) continue;
            auto& lv = level[static_cast<std::size_t>(v)];
            if (lv < 0) {
                lv = level[static_cast<std::size_t>(u)] + 1;
                todo.push(v);
            } else {
                g = std::gcd(g, std::abs(level[static_cast<std::size_t>(u)] + 1 - lv));
            }
        }
    }
    return static_cast<int>(g);
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p) {
    check_row_stochastic(p);
    if (!is_irreducible(p)) throw ValidationError("stationary_distribution: matrix is reducible");
    const auto k = p.rows();
    Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(k, k);
    a.row(k - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    b(k - 1) = 1.0;
    Eigen::VectorXd pi = a.fullPivLu().solve(b);
    if (!pi.allFinite() || (pi.array() <= 0.0).any())
        throw ComputationError("stationary_distribution: solve produced a non-positive component");
    return pi / pi.sum();
}

std::vector<double> eigen_moduli(const Eigen::MatrixXd& p) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(p, false);
    if (solver.info() != Eigen::Success) throw ComputationError("eigen-solver did not converge");
    std::vector<double> mod;
    mod.reserve(static_cast<std::size_t>(p.rows()));
    for (const auto& ev : solver.eigenvalues()) mod.push_back(std::abs(ev));
    std::sort(mod.begin(), mod.end(), std::greater<>());
    return mod;
}

double slem(const Eigen::MatrixXd& p) {
    check_row_stochastic(p);
    const auto mod = eigen_moduli(p);
    if (std::abs(mod.front() - 1.0) > kUnitModulusTol)
        throw ComputationError("leading eigenvalue modulus " + std::to_string(mod.front()) + " is not 1");
    if (mod.size() == 1) return 0.0;
    const double second = mod[1];
    if (second >= 1.0 - kUnitModulusTol)
        throw ComputationError("slem = 1: chain is not aperiodic/irreducible for mixing analysis");
    return second;
}

double detailed_balance_residual(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi) {
    Eigen::MatrixXd flow = pi.asDiagonal() * p;
    return (flow - flow.transpose()).cwiseAbs().maxCoeff();
}

Eigen::VectorXd symmetrized_eigenvalues(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi) {
    Eigen::VectorXd root = pi.cwiseSqrt();
    Eigen::MatrixXd s = root.asDiagonal() * p * root.cwiseInverse().asDiagonal();
    Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw ComputationError("symmetric eigen-solver did not converge");
    return solver.eigenvalues();
}

double relaxation_time(double slem_value) {
    if (!(slem_value >= 0.0 && slem_value < 1.0)) throw ValidationError("slem must lie in [0, 1)");
    return 1.0 / (1.0 - slem_value);
}

double mixing_lower_bound(double t_rel, double epsilon) { return (t_rel - 1.0) * std::log(1.0 / (2.0 * epsilon)); }

double mixing_upper_bound(double t_rel, double pi_min, double epsilon) {
    return t_rel * (0.5 * std::log(1.0 / pi_min) + std::log(1.0 / (2.0 * epsilon)));
}

long mixing_point_estimate(double slem_value, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
    if (!(slem_value >= 0.0 && slem_value < 1.0)) throw ValidationError("slem must lie in [0, 1)");
    if (slem_value == 0.0) return 1;
    const double t = std::log(1.0 / epsilon) / -std::log(slem_value);
    return std::max(1L, static_cast<long>(std::ceil(t)));
}

SpectralSummary mixing_analysis(const Eigen::MatrixXd& p, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
    check_row_stochastic(p);
    if (!is_irreducible(p) || period(p) != 1)
        throw ComputationError("chain is not aperiodic/irreducible for mixing analysis");

    SpectralSummary s;
    s.epsilon = epsilon;
    s.eigen_moduli = eigen_moduli(p);
    s.slem = slem(p);
    s.t_rel = relaxation_time(s.slem);
    s.stationary = stationary_distribution(p);
    s.pi_min = s.stationary.minCoeff();
    s.lower_bound = mixing_lower_bound(s.t_rel, epsilon);
    s.upper_bound = mixing_upper_bound(s.t_rel, s.pi_min, epsilon);
    s.point_estimate = mixing_point_estimate(s.slem, epsilon);
    s.detailed_balance_residual = detailed_balance_residual(p, s.stationary);
    s.reversible = s.detailed_balance_residual < kReversibleTol;
    s.bounds_reversible_only = !s.reversible;
    return s;
}

}  // namespace regimealloc
