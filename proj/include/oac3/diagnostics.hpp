#pragma once

#include "oac3/solver.hpp"

#include <Eigen/Core>

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace oac3 {

enum class CopySide { Left, Right };

struct CopyId {
    CopySide side;
    std::size_t index;

    friend auto operator<=>(const CopyId&, const CopyId&) = default;
};

/// Second derivatives of J, grouped into k x k blocks per pair of copies.
/// Only structurally nonzero blocks are stored. The assembled ordering is
/// z = (l_1, ..., l_n, r_1, ..., r_n).
struct HessianBlocks {
    std::size_t n = 0;
    std::size_t k = 0;
    std::map<std::pair<CopyId, CopyId>, Eigen::MatrixXd> blocks;

    Eigen::MatrixXd block(CopyId a, CopyId b) const;
    Eigen::MatrixXd assemble() const;
};

/// Concatenation (l_1, ..., l_n, r_1, ..., r_n) of a state's copies.
Eigen::VectorXd flatten(const SolverState& state);

/// Analytic Hessian of J for KLDivergence and GeneralizedI. Blocks carry
/// the curvature scale of the implemented phi (1/ln 2 for KL).
/// Throws UnsupportedDivergence for other kinds and DomainError when a
/// copy is not strictly positive.
HessianBlocks hessian_blocks(const SolverState& state, const ProbMatrix& pi, const SimilarityMatrix& S,
                             const SolverConfig& config);

/// 1 for GeneralizedI, 1/ln 2 for KLDivergence.
double hessian_scale(DivergenceKind kind);

/// z^T H z at z = flatten(state). For KL and generalized I this equals
/// hessian_scale * sum(pi).
double quadratic_form(const HessianBlocks& H, const SolverState& state);

struct Definiteness {
    bool positive_definite = false;
    double min_eigenvalue = 0.0;
};

/// Dense symmetric eigensolve of the assembled Hessian (dimension <= 200).
/// The matrix counts as positive definite when its smallest eigenvalue
/// exceeds 1e-12 times its largest magnitude eigenvalue.
Definiteness check_positive_definite(const HessianBlocks& H);

/// Gradient of J with respect to flatten(state), for every divergence.
Eigen::VectorXd objective_gradient(const SolverState& state, const ProbMatrix& pi, const SimilarityMatrix& S,
                                   const SolverConfig& config);

struct RateReport {
    std::vector<double> ratios; // |z_{t+1} - z*| / |z_t - z*|, t = 0, 1, ...
    std::size_t burn_in = 0;
    double rho_estimate = 0.0;  // max ratio at t >= burn_in
    bool qlinear = true;
};

/// Distance ratios of consecutive snapshots to z_star. Collection stops at
/// the first snapshot within distance_floor * max(1, |z*|) of z_star, where
/// the ratios would only measure rounding noise.
/// Throws InsufficientTrace with fewer than burn_in + 3 snapshots.
RateReport qlinear_ratios(std::span<const SolverState> snapshots, const SolverState& z_star, std::size_t burn_in,
                          double distance_floor = 1e-9);

/// sum_i (lambda + alpha sum_{j != i} s_ij) d(a_i, b_i)
double delta_J(const ProbMatrix& left_a, const ProbMatrix& left_b, const SimilarityMatrix& S,
               const SolverConfig& config);

struct DeltaJMonitor {
    ProbMatrix reference_left;
    std::vector<double> values; // delta_J(reference_left, left at sweep t)

    /// Largest increase values[t+1] - values[t] (0 when monotone).
    double max_increase() const;
    bool non_increasing(double slack = 1e-10) const { return max_increase() <= slack; }
};

DeltaJMonitor monitor_delta_J(std::span<const SolverState> snapshots, const ProbMatrix& reference_left,
                              const SimilarityMatrix& S, const SolverConfig& config);

/// Largest relative increase J_{t+1} - J_t over max(J_t, 1e-300) along a trace.
double max_relative_increase(std::span<const double> trace);

/// Sweeps from the uniform start until the copies stop moving (max change
/// <= 1e-15 relative) or max_iters sweeps; used as the limit point z*.
SolverState reference_solution(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
                               std::size_t max_iters = 20000);

struct HessianSection {
    std::string status = "ok"; // ok | skipped=unsupported | skipped=too-large
    bool positive_definite = false;
    double min_eigenvalue = 0.0;
    double quadratic_form = 0.0;
    double expected_quadratic_form = 0.0;
    double symmetry_error = 0.0;
};

struct DiagnosticsReport {
    std::string divergence;
    std::size_t n = 0;
    std::size_t k = 0;
    double alpha = 0.0;
    double lambda = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double final_objective = 0.0;
    double descent_max_relative_increase = 0.0;
    HessianSection hessian;
    RateReport rate;
    double delta_j_max_increase = 0.0;
    std::optional<double> lambda_hat;
};

/// One `section: key=value ...` line per section.
std::string format_report(const DiagnosticsReport& report);

struct DiagnosticsOptions {
    std::size_t burn_in = 5;
    std::size_t max_hessian_dimension = 200;
    bool compute_lambda_hat = false;
};

/// Solves, records every sweep, and evaluates every check. trace receives
/// the recorded snapshots when non-null.
DiagnosticsReport diagnose(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
                           const DiagnosticsOptions& options = {}, std::vector<SolverState>* trace = nullptr,
                           DeltaJMonitor* monitor = nullptr);

} // namespace oac3
