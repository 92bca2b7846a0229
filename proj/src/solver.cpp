#include "oac3/solver.hpp"

#include "oac3/errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

namespace oac3 {
namespace {

void check_shapes(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config)
{
    if (pi.rows() == 0 || pi.cols() == 0) throw ShapeError("pi is empty");
    if (static_cast<std::size_t>(pi.rows()) != S.size()) {
        throw ShapeError("pi has " + std::to_string(pi.rows()) + " rows, similarity matrix has size "
                         + std::to_string(S.size()));
    }
    if (pi.cols() != config.divergence.dimension) {
        throw ShapeError("pi has " + std::to_string(pi.cols()) + " classes, divergence dimension is "
                         + std::to_string(config.divergence.dimension));
    }
}

void check_state(const SolverState& state, const ProbMatrix& pi)
{
    if (state.left.rows() != pi.rows() || state.left.cols() != pi.cols() || state.right.rows() != pi.rows()
        || state.right.cols() != pi.cols()) {
        throw ShapeError("solver state does not match pi");
    }
}

ProbMatrix clamp_rows(const DivergenceSpec& spec, const ProbMatrix& values)
{
    ProbMatrix out(values.rows(), values.cols());
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        out.row(i) = clamp_point(spec, values.row(i).transpose()).transpose();
    }
    return out;
}

// Sums per-row contributions in ascending row order so the total does not
// depend on the worker count.
template <class RowTerm>
double sum_rows(std::size_t n, std::size_t threads, RowTerm&& term)
{
    std::vector<double> terms(n, 0.0);
    detail::parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) terms[i] = term(i);
    });
    return std::accumulate(terms.begin(), terms.end(), 0.0);
}

Point right_update(std::size_t j, const ProbMatrix& left, const ProbMatrix& pi, const SimilarityMatrix& S,
                   const SolverConfig& config)
{
    const auto row = static_cast<Eigen::Index>(j);
    const Point anchor = clamp_point(config.divergence, pi.row(row).transpose());
    Point offset = Point::Zero(anchor.size());
    double denominator = 1.0 + config.lambda;
    if (config.alpha > 0.0 && S.row_sum(j) > 0.0) {
        for (const auto& nb : S.neighbors(j)) {
            offset += (config.alpha * nb.weight)
                      * (left.row(static_cast<Eigen::Index>(nb.index)).transpose() - anchor);
        }
        denominator += config.alpha * S.row_sum(j);
    }
    offset += config.lambda * (left.row(row).transpose() - anchor);
    return clamp_point(config.divergence, anchor + offset / denominator);
}

template <class GradientOf>
Point left_update(std::size_t i, const SolverState& state, const SimilarityMatrix& S, const SolverConfig& config,
                  GradientOf&& gradient_of)
{
    const auto row = static_cast<Eigen::Index>(i);
    const double gamma = config.alpha * S.row_sum(i);
    const double weight = gamma + config.lambda;
    if (weight <= 0.0) return state.left.row(row).transpose();
    if (gamma == 0.0) return state.right.row(row).transpose();

    const Point anchor = gradient_of(i);
    Point offset = Point::Zero(anchor.size());
    for (const auto& nb : S.neighbors(i)) offset += (config.alpha * nb.weight) * (gradient_of(nb.index) - anchor);
    if ((offset.array() == 0.0).all()) return state.right.row(row).transpose();
    const Point dual_mean = anchor + offset / weight;

    Point y = clamp_point(config.divergence, grad_phi_inv(config.divergence, dual_mean));
    if (config.divergence.kind == DivergenceKind::KLDivergence) y /= y.sum();
    return y;
}

struct Bounds {
    double lower;
    double upper;
};

Bounds domain_bounds(const DivergenceSpec& spec)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (spec.kind) {
    case DivergenceKind::SquaredLoss:
    case DivergenceKind::SquaredEuclidean:
        return {-inf, inf};
    case DivergenceKind::LogisticLoss:
        return {spec.domain_floor, 1.0 - spec.domain_floor};
    default:
        return {spec.domain_floor, inf};
    }
}

// Euclidean projection onto {x : x_l >= floor, sum x = 1}.
void project_floored_simplex(Eigen::Ref<Eigen::RowVectorXd> row, double floor)
{
    const auto k = row.size();
    const double mass = 1.0 - static_cast<double>(k) * floor;
    std::vector<double> v(static_cast<std::size_t>(k));
    for (Eigen::Index l = 0; l < k; ++l) v[static_cast<std::size_t>(l)] = row[l] - floor;
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double shift = 0.0;
    for (std::size_t t = 0; t < sorted.size(); ++t) {
        cumulative += sorted[t];
        const double candidate = (cumulative - mass) / static_cast<double>(t + 1);
        if (sorted[t] - candidate > 0.0) shift = candidate;
    }
    for (Eigen::Index l = 0; l < k; ++l) row[l] = std::max(v[static_cast<std::size_t>(l)] - shift, 0.0) + floor;
}

ProbMatrix project(const DivergenceSpec& spec, const ProbMatrix& Y)
{
    ProbMatrix out = Y;
    if (spec.kind == DivergenceKind::KLDivergence) {
        for (Eigen::Index i = 0; i < out.rows(); ++i) project_floored_simplex(out.row(i), spec.domain_floor);
        return out;
    }
    const auto [lower, upper] = domain_bounds(spec);
    return out.cwiseMax(lower).cwiseMin(upper);
}

ProbMatrix j0_gradient(const ProbMatrix& Y, const ProbMatrix& pi, const SimilarityMatrix& S,
                       const SolverConfig& config)
{
    const auto& spec = config.divergence;
    const auto n = Y.rows();
    ProbMatrix grads(n, Y.cols());
    ProbMatrix curv(n, Y.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        grads.row(i) = grad_phi(spec, Y.row(i).transpose()).transpose();
        curv.row(i) = curvature(spec, Y.row(i).transpose()).transpose();
    }
    ProbMatrix g(n, Y.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        // d/dq d(p, q) = -H(q)(p - q);  d/dp d(p, q) = grad(p) - grad(q)
        Eigen::RowVectorXd gi = -curv.row(i).cwiseProduct(pi.row(i) - Y.row(i));
        for (const auto& nb : S.neighbors(static_cast<std::size_t>(i))) {
            const auto j = static_cast<Eigen::Index>(nb.index);
            gi += config.alpha * nb.weight * (grads.row(i) - grads.row(j));
            gi -= config.alpha * nb.weight * curv.row(i).cwiseProduct(Y.row(j) - Y.row(i));
        }
        g.row(i) = gi;
    }
    return g;
}

} // namespace

void SolverConfig::validate() const
{
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ArgumentError("alpha must be a finite value >= 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be a finite value >= 0");
    if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be > 0");
    if (max_iters == 0) throw ArgumentError("max_iters must be >= 1");
    if (divergence.dimension < 1) throw ArgumentError("divergence dimension must be >= 1");
    if (!(divergence.domain_floor > 0.0)) throw ArgumentError("domain_floor must be > 0");
}

SolverState initial_state(std::size_t n, std::size_t k)
{
    SolverState state;
    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(k);
    state.left = ProbMatrix::Constant(rows, cols, 1.0 / static_cast<double>(k));
    state.right = state.left;
    return state;
}

double objective_J0(const ProbMatrix& Y, const ProbMatrix& pi, const SimilarityMatrix& S,
                    const SolverConfig& config)
{
    check_shapes(pi, S, config);
    if (Y.rows() != pi.rows() || Y.cols() != pi.cols()) throw ShapeError("Y does not match pi");
    const auto& spec = config.divergence;
    return sum_rows(static_cast<std::size_t>(Y.rows()), config.threads, [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        double term = bregman(spec, pi.row(row).transpose(), Y.row(row).transpose());
        if (config.alpha > 0.0) {
            double pairs = 0.0;
            for (const auto& nb : S.neighbors(i)) {
                pairs += nb.weight
                         * bregman(spec, Y.row(row).transpose(), Y.row(static_cast<Eigen::Index>(nb.index)).transpose());
            }
            term += config.alpha * pairs;
        }
        return term;
    });
}

double objective_J(const ProbMatrix& left, const ProbMatrix& right, const ProbMatrix& pi,
                   const SimilarityMatrix& S, const SolverConfig& config)
{
    check_shapes(pi, S, config);
    const auto& spec = config.divergence;
    return sum_rows(static_cast<std::size_t>(pi.rows()), config.threads, [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        double term = bregman(spec, pi.row(row).transpose(), right.row(row).transpose());
        if (config.alpha > 0.0) {
            double pairs = 0.0;
            for (const auto& nb : S.neighbors(i)) {
                pairs += nb.weight
                         * bregman(spec, left.row(row).transpose(),
                                   right.row(static_cast<Eigen::Index>(nb.index)).transpose());
            }
            term += config.alpha * pairs;
        }
        if (config.lambda > 0.0) {
            term += config.lambda * bregman(spec, left.row(row).transpose(), right.row(row).transpose());
        }
        return term;
    });
}

double objective_J(const SolverState& state, const ProbMatrix& pi, const SimilarityMatrix& S,
                   const SolverConfig& config)
{
    check_state(state, pi);
    return objective_J(state.left, state.right, pi, S, config);
}

Point update_right(std::size_t j, const SolverState& state, const ProbMatrix& pi, const SimilarityMatrix& S,
                   const SolverConfig& config)
{
    check_shapes(pi, S, config);
    check_state(state, pi);
    if (j >= S.size()) throw ArgumentError("instance index out of range");
    return right_update(j, state.left, pi, S, config);
}

Point update_left(std::size_t i, const SolverState& state, const SimilarityMatrix& S, const SolverConfig& config)
{
    if (i >= S.size() || static_cast<std::size_t>(state.right.rows()) != S.size()) {
        throw ArgumentError("instance index out of range");
    }
    return left_update(i, state, S, config, [&](std::size_t j) {
        return grad_phi(config.divergence, state.right.row(static_cast<Eigen::Index>(j)).transpose());
    });
}

void sweep_right(SolverState& state, const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config)
{
    ProbMatrix next(state.right.rows(), state.right.cols());
    detail::parallel_for(S.size(), config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            next.row(static_cast<Eigen::Index>(j)) = right_update(j, state.left, pi, S, config).transpose();
        }
    });
    state.right.swap(next);
}

void sweep_left(SolverState& state, const SimilarityMatrix& S, const SolverConfig& config)
{
    const auto& spec = config.divergence;
    ProbMatrix grads(state.right.rows(), state.right.cols());
    detail::parallel_for(S.size(), config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const auto row = static_cast<Eigen::Index>(j);
            grads.row(row) = grad_phi(spec, state.right.row(row).transpose()).transpose();
        }
    });
    ProbMatrix next(state.left.rows(), state.left.cols());
    detail::parallel_for(S.size(), config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            next.row(static_cast<Eigen::Index>(i)) =
                left_update(i, state, S, config, [&](std::size_t j) {
                    return grads.row(static_cast<Eigen::Index>(j)).transpose();
                }).transpose();
        }
    });
    state.left.swap(next);
}

Labeling finalize(const SolverState& state, const SolverConfig& config, bool converged)
{
    Labeling out;
    out.iterations_used = state.iteration;
    out.converged = converged;
    const ProbMatrix average = 0.5 * (state.left + state.right);
    const auto n = average.rows();
    const auto k = average.cols();
    out.probabilities.resize(n, k);
    out.labels.resize(static_cast<std::size_t>(n));
    const bool nonnegative = is_nonnegative_domain(config.divergence.kind);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index l = 1; l < k; ++l) {
            if (average(i, l) > average(i, best)) best = l;
        }
        out.labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);

        Eigen::RowVectorXd row = nonnegative ? Eigen::RowVectorXd(average.row(i))
                                             : Eigen::RowVectorXd(average.row(i).cwiseMax(0.0));
        const double total = row.sum();
        if (total > 0.0) {
            out.probabilities.row(i) = row / total;
        } else {
            out.probabilities.row(i).setConstant(1.0 / static_cast<double>(k));
        }
    }
    return out;
}

RunResult run(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
              const IterationObserver& observer)
{
    config.validate();
    check_shapes(pi, S, config);
    for (Eigen::Index i = 0; i < pi.rows(); ++i) validate_point(config.divergence, pi.row(i).transpose());
    const ProbMatrix target = clamp_rows(config.divergence, pi);

    const auto n = static_cast<std::size_t>(pi.rows());
    const auto k = static_cast<std::size_t>(pi.cols());
    SolverState state = initial_state(n, k);
    state.objective_trace.push_back(objective_J(state, target, S, config));
    if (observer) observer(state);

    bool converged = false;
    while (state.iteration < config.max_iters) {
        sweep_right(state, target, S, config);
        sweep_left(state, S, config);
        ++state.iteration;

        const double previous = state.objective_trace.back();
        const double current = objective_J(state, target, S, config);
        state.objective_trace.push_back(current);
        if (observer) observer(state);
        if (std::abs(current - previous) / std::max(previous, 1e-300) < config.epsilon) {
            converged = true;
            break;
        }
    }
    RunResult result;
    result.labeling = finalize(state, config, converged);
    result.state = std::move(state);
    return result;
}

ProbMatrix minimize_J0(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
                       const J0MinimizerOptions& options)
{
    config.validate();
    check_shapes(pi, S, config);
    const auto& spec = config.divergence;
    const ProbMatrix target = clamp_rows(spec, pi);

    ProbMatrix y = project(spec, target);
    double value = objective_J0(y, target, S, config);
    double step = 1.0;
    for (std::size_t it = 0; it < options.max_iters; ++it) {
        const ProbMatrix g = j0_gradient(y, target, S, config);
        bool accepted = false;
        ProbMatrix candidate;
        double candidate_value = value;
        while (step > 1e-20) {
            candidate = project(spec, y - step * g);
            const ProbMatrix diff = candidate - y;
            candidate_value = objective_J0(candidate, target, S, config);
            const double model = value + (g.array() * diff.array()).sum() + diff.squaredNorm() / (2.0 * step);
            if (std::isfinite(candidate_value) && candidate_value <= model) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        const double moved = (candidate - y).cwiseAbs().maxCoeff();
        y = std::move(candidate);
        value = candidate_value;
        if (moved < options.step_tolerance) break;
        step = std::min(step * 2.0, 1e6);
    }
    return y;
}

double lambda_threshold(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
                        const SolverState& converged, const ProbMatrix& y_star)
{
    check_shapes(pi, S, config);
    check_state(converged, pi);
    const auto& spec = config.divergence;
    double coupling = 0.0;
    double largest = 0.0;
    for (Eigen::Index i = 0; i < pi.rows(); ++i) {
        const double d = bregman(spec, converged.left.row(i).transpose(), converged.right.row(i).transpose());
        coupling += d;
        largest = std::max(largest, d);
    }
    if (largest <= 1e-9) return config.lambda;
    if (coupling < 1e-15) throw DivisionDegenerate("copies differ but their total divergence is below 1e-15");

    const ProbMatrix target = clamp_rows(spec, pi);
    SolverConfig uncoupled = config;
    uncoupled.lambda = 0.0;
    const double relaxed = objective_J(converged.left, converged.right, target, S, uncoupled);
    return (objective_J0(y_star, target, S, config) - relaxed) / coupling;
}

double lambda_threshold(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
                        const SolverState& converged)
{
    return lambda_threshold(pi, S, config, converged, minimize_J0(pi, S, config));
}

} // namespace oac3
