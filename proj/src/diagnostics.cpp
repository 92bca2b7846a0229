#include "oac3/diagnostics.hpp"

#include "oac3/errors.hpp"
#include "oac3/io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace oac3 {
namespace {

Eigen::Index offset_of(CopyId id, std::size_t n, std::size_t k)
{
    const std::size_t base = id.side == CopySide::Left ? 0 : n;
    return static_cast<Eigen::Index>((base + id.index) * k);
}

Eigen::MatrixXd diagonal_block(const Eigen::VectorXd& diag)
{
    return diag.asDiagonal().toDenseMatrix();
}

const char* flag(bool value) { return value ? "true" : "false"; }

} // namespace

Eigen::MatrixXd HessianBlocks::block(CopyId a, CopyId b) const
{
    auto it = blocks.find({a, b});
    if (it == blocks.end()) {
        return Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    }
    return it->second;
}

Eigen::MatrixXd HessianBlocks::assemble() const
{
    const auto dim = static_cast<Eigen::Index>(2 * n * k);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    const auto kk = static_cast<Eigen::Index>(k);
    for (const auto& [key, value] : blocks) {
        H.block(offset_of(key.first, n, k), offset_of(key.second, n, k), kk, kk) = value;
    }
    return H;
}

Eigen::VectorXd flatten(const SolverState& state)
{
    const auto n = state.left.rows();
    const auto k = state.left.cols();
    Eigen::VectorXd z(2 * n * k);
    z.head(n * k) = Eigen::Map<const Eigen::VectorXd>(state.left.data(), n * k);
    z.tail(n * k) = Eigen::Map<const Eigen::VectorXd>(state.right.data(), n * k);
    return z;
}

double hessian_scale(DivergenceKind kind)
{
    switch (kind) {
    case DivergenceKind::GeneralizedI: return 1.0;
    case DivergenceKind::KLDivergence: return 1.0 / std::numbers::ln2;
    default:
        throw UnsupportedDivergence("analytic Hessian blocks exist only for kl and gen-i, not "
                                    + std::string(to_token(kind)));
    }
}

HessianBlocks hessian_blocks(const SolverState& state, const ProbMatrix& pi, const SimilarityMatrix& S,
                             const SolverConfig& config)
{
    const double c = hessian_scale(config.divergence.kind);
    const auto n = static_cast<std::size_t>(pi.rows());
    const auto k = static_cast<std::size_t>(pi.cols());
    if (static_cast<std::size_t>(state.left.rows()) != n || state.left.cols() != pi.cols()
        || state.right.rows() != state.left.rows() || state.right.cols() != pi.cols() || S.size() != n) {
        throw ShapeError("hessian_blocks: state, pi and S disagree on shape");
    }
    if ((state.left.array() <= 0.0).any() || (state.right.array() <= 0.0).any()) {
        throw DomainError("hessian_blocks: copies must be strictly positive");
    }

    HessianBlocks H;
    H.n = n;
    H.k = k;
    const double alpha = config.alpha;
    const double lambda = config.lambda;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const Eigen::VectorXd l_i = state.left.row(row).transpose();
        const Eigen::VectorXd r_i = state.right.row(row).transpose();
        const CopyId left{CopySide::Left, i};
        const CopyId right{CopySide::Right, i};

        const Eigen::VectorXd ll = c * (alpha * S.row_sum(i) + lambda) * l_i.cwiseInverse();
        H.blocks[{left, left}] = diagonal_block(ll);

        Eigen::VectorXd mass = pi.row(row).transpose() + lambda * l_i;
        for (const auto& nb : S.neighbors(i)) {
            mass += alpha * nb.weight * state.left.row(static_cast<Eigen::Index>(nb.index)).transpose();
        }
        H.blocks[{right, right}] = diagonal_block(c * mass.cwiseQuotient(r_i.cwiseProduct(r_i)));

        if (lambda > 0.0) {
            const Eigen::MatrixXd coupling = diagonal_block(-c * lambda * r_i.cwiseInverse());
            H.blocks[{left, right}] = coupling;
            H.blocks[{right, left}] = coupling;
        }
    }
    if (alpha > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            for (const auto& nb : S.neighbors(i)) {
                const std::size_t j = nb.index;
                const Eigen::VectorXd r_j = state.right.row(static_cast<Eigen::Index>(j)).transpose();
                const Eigen::MatrixXd cross = diagonal_block(-c * alpha * nb.weight * r_j.cwiseInverse());
                H.blocks[{CopyId{CopySide::Left, i}, CopyId{CopySide::Right, j}}] = cross;
                H.blocks[{CopyId{CopySide::Right, j}, CopyId{CopySide::Left, i}}] = cross;
            }
        }
    }
    return H;
}

double quadratic_form(const HessianBlocks& H, const SolverState& state)
{
    const Eigen::VectorXd z = flatten(state);
    return z.dot(H.assemble() * z);
}

Definiteness check_positive_definite(const HessianBlocks& H)
{
    const Eigen::MatrixXd A = H.assemble();
    if (A.rows() > 200) throw ArgumentError("positive-definiteness check is limited to dimension 200");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A, Eigen::EigenvaluesOnly);
    const auto& eig = solver.eigenvalues();
    Definiteness out;
    out.min_eigenvalue = eig.minCoeff();
    const double scale = eig.cwiseAbs().maxCoeff();
    out.positive_definite = out.min_eigenvalue > 1e-12 * scale;
    return out;
}

Eigen::VectorXd objective_gradient(const SolverState& state, const ProbMatrix& pi, const SimilarityMatrix& S,
                                   const SolverConfig& config)
{
    const auto& spec = config.divergence;
    const auto n = pi.rows();
    const auto k = pi.cols();
    ProbMatrix left_grad(n, k);
    ProbMatrix right_grad(n, k);
    ProbMatrix right_curv(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        left_grad.row(i) = grad_phi(spec, state.left.row(i).transpose()).transpose();
        right_grad.row(i) = grad_phi(spec, state.right.row(i).transpose()).transpose();
        right_curv.row(i) = curvature(spec, state.right.row(i).transpose()).transpose();
    }
    const ProbMatrix target = [&] {
        ProbMatrix t(n, k);
        for (Eigen::Index i = 0; i < n; ++i) t.row(i) = clamp_point(spec, pi.row(i).transpose()).transpose();
        return t;
    }();

    ProbMatrix g_left = ProbMatrix::Zero(n, k);
    ProbMatrix pull = ProbMatrix::Zero(n, k); // right copy j: sum of w (p - r_j) over terms d(p, r_j)
    for (Eigen::Index i = 0; i < n; ++i) {
        pull.row(i) += target.row(i) - state.right.row(i);
        g_left.row(i) += config.lambda * (left_grad.row(i) - right_grad.row(i));
        pull.row(i) += config.lambda * (state.left.row(i) - state.right.row(i));
        for (const auto& nb : S.neighbors(static_cast<std::size_t>(i))) {
            const auto j = static_cast<Eigen::Index>(nb.index);
            g_left.row(i) += config.alpha * nb.weight * (left_grad.row(i) - right_grad.row(j));
            pull.row(j) += config.alpha * nb.weight * (state.left.row(i) - state.right.row(j));
        }
    }
    const ProbMatrix g_right = -right_curv.cwiseProduct(pull);

    Eigen::VectorXd g(2 * n * k);
    g.head(n * k) = Eigen::Map<const Eigen::VectorXd>(g_left.data(), n * k);
    g.tail(n * k) = Eigen::Map<const Eigen::VectorXd>(g_right.data(), n * k);
    return g;
}

RateReport qlinear_ratios(std::span<const SolverState> snapshots, const SolverState& z_star, std::size_t burn_in,
                          double distance_floor)
{
    if (snapshots.size() < burn_in + 3) {
        throw InsufficientTrace("need at least " + std::to_string(burn_in + 3) + " snapshots, got "
                                + std::to_string(snapshots.size()));
    }
    const Eigen::VectorXd target = flatten(z_star);
    const double floor = distance_floor * std::max(1.0, target.norm());
    RateReport report;
    report.burn_in = burn_in;
    double previous = (flatten(snapshots[0]) - target).norm();
    for (std::size_t t = 1; t < snapshots.size(); ++t) {
        if (previous <= floor) break;
        const double current = (flatten(snapshots[t]) - target).norm();
        report.ratios.push_back(current / previous);
        previous = current;
    }
    for (std::size_t t = burn_in; t < report.ratios.size(); ++t) {
        report.rho_estimate = std::max(report.rho_estimate, report.ratios[t]);
    }
    report.qlinear = report.rho_estimate < 1.0;
    return report;
}

double delta_J(const ProbMatrix& left_a, const ProbMatrix& left_b, const SimilarityMatrix& S,
               const SolverConfig& config)
{
    if (left_a.rows() != left_b.rows() || left_a.cols() != left_b.cols()
        || static_cast<std::size_t>(left_a.rows()) != S.size()) {
        throw ShapeError("delta_J: shapes disagree");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < left_a.rows(); ++i) {
        const double weight = config.lambda + config.alpha * S.row_sum(static_cast<std::size_t>(i));
        if (weight == 0.0) continue;
        total += weight * bregman(config.divergence, left_a.row(i).transpose(), left_b.row(i).transpose());
    }
    return total;
}

double DeltaJMonitor::max_increase() const
{
    double worst = 0.0;
    for (std::size_t t = 1; t < values.size(); ++t) worst = std::max(worst, values[t] - values[t - 1]);
    return worst;
}

DeltaJMonitor monitor_delta_J(std::span<const SolverState> snapshots, const ProbMatrix& reference_left,
                              const SimilarityMatrix& S, const SolverConfig& config)
{
    DeltaJMonitor monitor;
    monitor.reference_left = reference_left;
    monitor.values.reserve(snapshots.size());
    for (const auto& snap : snapshots) monitor.values.push_back(delta_J(reference_left, snap.left, S, config));
    return monitor;
}

double max_relative_increase(std::span<const double> trace)
{
    double worst = 0.0;
    for (std::size_t t = 1; t < trace.size(); ++t) {
        worst = std::max(worst, (trace[t] - trace[t - 1]) / std::max(trace[t - 1], 1e-300));
    }
    return worst;
}

SolverState reference_solution(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
                               std::size_t max_iters)
{
    config.validate();
    SolverState state = initial_state(static_cast<std::size_t>(pi.rows()), static_cast<std::size_t>(pi.cols()));
    for (std::size_t t = 0; t < max_iters; ++t) {
        const Eigen::VectorXd before = flatten(state);
        sweep_right(state, pi, S, config);
        sweep_left(state, S, config);
        ++state.iteration;
        const Eigen::VectorXd after = flatten(state);
        const double scale = std::max(1.0, after.cwiseAbs().maxCoeff());
        if ((after - before).cwiseAbs().maxCoeff() <= 1e-15 * scale) break;
    }
    return state;
}

std::string format_report(const DiagnosticsReport& r)
{
    std::ostringstream out;
    out << "divergence: " << r.divergence << '\n';
    out << "problem: n=" << r.n << " k=" << r.k << " alpha=" << io::format_double(r.alpha)
        << " lambda=" << io::format_double(r.lambda) << '\n';
    out << "solver: converged=" << flag(r.converged) << " iters=" << r.iterations
        << " J=" << io::format_double(r.final_objective) << '\n';
    out << "descent: non_increasing=" << flag(r.descent_max_relative_increase <= 1e-12)
        << " max_relative_increase=" << io::format_double(r.descent_max_relative_increase) << '\n';
    if (r.hessian.status == "ok") {
        out << "hessian: pd=" << flag(r.hessian.positive_definite)
            << " min_eigenvalue=" << io::format_double(r.hessian.min_eigenvalue)
            << " quadratic_form=" << io::format_double(r.hessian.quadratic_form)
            << " expected=" << io::format_double(r.hessian.expected_quadratic_form)
            << " residual=" << io::format_double(r.hessian.quadratic_form - r.hessian.expected_quadratic_form)
            << " symmetry_error=" << io::format_double(r.hessian.symmetry_error) << '\n';
    } else {
        out << "hessian: " << r.hessian.status << '\n';
    }
    out << "rate: qlinear=" << flag(r.rate.qlinear) << " rho=" << io::format_double(r.rate.rho_estimate)
        << " ratios=" << r.rate.ratios.size() << " burn_in=" << r.rate.burn_in << '\n';
    out << "delta_j: non_increasing=" << flag(r.delta_j_max_increase <= 1e-10)
        << " max_increase=" << io::format_double(r.delta_j_max_increase) << '\n';
    if (r.lambda_hat) out << "lambda_hat: " << io::format_double(*r.lambda_hat) << '\n';
    return out.str();
}

DiagnosticsReport diagnose(const ProbMatrix& pi, const SimilarityMatrix& S, const SolverConfig& config,
                           const DiagnosticsOptions& options, std::vector<SolverState>* trace,
                           DeltaJMonitor* monitor)
{
    std::vector<SolverState> snapshots;
    const RunResult result = run(pi, S, config, [&](const SolverState& s) { snapshots.push_back(s); });

    DiagnosticsReport report;
    report.divergence = std::string(to_token(config.divergence.kind));
    report.n = static_cast<std::size_t>(pi.rows());
    report.k = static_cast<std::size_t>(pi.cols());
    report.alpha = config.alpha;
    report.lambda = config.lambda;
    report.iterations = result.labeling.iterations_used;
    report.converged = result.labeling.converged;
    report.final_objective = result.state.objective_trace.back();
    report.descent_max_relative_increase = max_relative_increase(result.state.objective_trace);

    const SolverState reference = reference_solution(pi, S, config);

    const auto kind = config.divergence.kind;
    if (kind != DivergenceKind::KLDivergence && kind != DivergenceKind::GeneralizedI) {
        report.hessian.status = "skipped=unsupported";
    } else if (2 * report.n * report.k > options.max_hessian_dimension) {
        report.hessian.status = "skipped=too-large";
    } else {
        const HessianBlocks H = hessian_blocks(result.state, pi, S, config);
        const Eigen::MatrixXd A = H.assemble();
        const Definiteness pd = check_positive_definite(H);
        report.hessian.positive_definite = pd.positive_definite;
        report.hessian.min_eigenvalue = pd.min_eigenvalue;
        report.hessian.quadratic_form = quadratic_form(H, result.state);
        report.hessian.expected_quadratic_form = hessian_scale(kind) * pi.sum();
        report.hessian.symmetry_error = (A - A.transpose()).cwiseAbs().maxCoeff();
    }

    if (snapshots.size() >= options.burn_in + 3) {
        report.rate = qlinear_ratios(snapshots, reference, options.burn_in);
    } else {
        report.rate.burn_in = options.burn_in;
    }
    DeltaJMonitor dj = monitor_delta_J(snapshots, reference.left, S, config);
    report.delta_j_max_increase = dj.max_increase();

    if (options.compute_lambda_hat && config.lambda > 0.0) {
        report.lambda_hat = lambda_threshold(pi, S, config, reference);
    }
    if (monitor) *monitor = std::move(dj);
    if (trace) *trace = std::move(snapshots);
    return report;
}

} // namespace oac3
