#pragma once

#include "oac3/divergences.hpp"
#include "oac3/ensemble_inputs.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace oac3 {

struct SolverConfig {
    double alpha = 0.0;     // weight of the cluster-ensemble term
    double lambda = 0.0;    // coupling between left and right copies
    double epsilon = 1e-10; // relative objective change that stops the loop
    std::size_t max_iters = 1000;
    DivergenceSpec divergence;
    std::size_t threads = 1; // 0 = one per hardware thread

    /// Throws ArgumentError unless alpha >= 0, lambda >= 0, epsilon > 0 and
    /// max_iters >= 1.
    void validate() const;
};

struct SolverState {
    ProbMatrix left;  // copies appearing as first Bregman argument
    ProbMatrix right; // copies appearing as second Bregman argument
    std::size_t iteration = 0;
    std::vector<double> objective_trace; // J after 0, 1, ..., iteration sweeps
};

struct Labeling {
    ProbMatrix probabilities;
    std::vector<std::size_t> labels; // row argmax, lowest index on ties
    std::size_t iterations_used = 0;
    bool converged = false;
};

struct RunResult {
    Labeling labeling;
    SolverState state;
};

/// Called with the state after initialization and after every full sweep.
using IterationObserver = std::function<void(const SolverState&)>;

/// Every copy set to the uniform vector 1/k.
SolverState initial_state(std::size_t n, std::size_t k);

/// sum_i d(pi_i, y_i) + alpha sum_{i,j} s_ij d(y_i, y_j), over ordered pairs.
double objective_J0(const ProbMatrix& Y, const ProbMatrix& pi, const SimilarityMatrix& S,
                    const SolverConfig& config);

/// sum_i d(pi_i, r_i) + alpha sum_{i,j} s_ij d(l_i, r_j) + lambda sum_i d(l_i, r_i).
double objective_J(const ProbMatrix& left, const ProbMatrix& right, const ProbMatrix& pi,
                   const SimilarityMatrix& S, const SolverConfig& config);
double objective_J(const SolverState& state, const ProbMatrix& pi, const SimilarityMatrix& S,
                   const SolverConfig& config);

/// Exact minimizer over the right copy of instance j with all left copies
/// fixed: the weighted arithmetic mean of pi_j, the neighbors' left copies
/// and the instance's own left copy.
Point update_right(std::size_t j, const SolverState& state, const ProbMatrix& pi,
                   const SimilarityMatrix& S, const SolverConfig& config);

/// Exact minimizer over the left copy of instance i with all right copies
/// fixed: the same weighted mean taken in gradient (dual) coordinates and
/// mapped back through grad_phi_inv. KL results are rescaled onto the
/// simplex. Returns the current left copy unchanged when the instance has
/// neither neighbors nor coupling.
Point update_left(std::size_t i, const SolverState& state, const SimilarityMatrix& S,
                  const SolverConfig& config);

/// Applies update_right (resp. update_left) to every instance, writing into
/// a fresh buffer that replaces the old copies once the sweep is done.
void sweep_right(SolverState& state, const ProbMatrix& pi, const SimilarityMatrix& S,
                 const SolverConfig& config);
void sweep_left(SolverState& state, const SimilarityMatrix& S, const SolverConfig& config);

/// Averages the copies and normalizes each row (see Labeling).
Labeling finalize(const SolverState& state, const SolverConfig& config, bool converged);

/// Alternates right and left sweeps from the uniform start until the
/// relative change of J drops below epsilon or max_iters sweeps are done.
RunResult run(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
              const IterationObserver& observer = {});

struct J0MinimizerOptions {
    std::size_t max_iters = 100000;
    double step_tolerance = 1e-13;
};

/// Projected-gradient minimizer of J0 started from pi. Projection is onto
/// the clamped domain, or the floored simplex for KL.
ProbMatrix minimize_J0(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
                       const J0MinimizerOptions& options = {});

/// Smallest coupling weight for which the two copies are guaranteed to
/// coincide, bounded from a converged state at config.lambda. Returns
/// config.lambda when the copies already coincide (max_i d(l_i, r_i) <=
/// 1e-9); otherwise (J0(y*) - J(l, r; lambda = 0)) / sum_i d(l_i, r_i).
double lambda_threshold(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
                        const SolverState& converged, const ProbMatrix& y_star);
double lambda_threshold(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
                        const SolverState& converged);

} // namespace oac3
