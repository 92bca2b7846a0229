#include "oac3/divergences.hpp"

#include "oac3/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace oac3 {
namespace {

constexpr double kLn2 = std::numbers::ln2;

// g(u) = (1+u) ln(1+u) - u, with a series near u = 0 where the two terms cancel.
double entropy_gap(double u)
{
    if (std::abs(u) < 1e-2) {
        double term = u * u;
        double sum = 0.0;
        double sign = 1.0;
        for (int n = 2; n <= 11; ++n) {
            sum += sign * term / (n * (n - 1.0));
            term *= u;
            sign = -sign;
        }
        return sum;
    }
    return (1.0 + u) * std::log1p(u) - u;
}

// u - ln(1+u), same treatment.
double log_gap(double u)
{
    if (std::abs(u) < 1e-2) {
        double term = u * u;
        double sum = 0.0;
        double sign = 1.0;
        for (int n = 2; n <= 11; ++n) {
            sum += sign * term / n;
            term *= u;
            sign = -sign;
        }
        return sum;
    }
    return u - std::log1p(u);
}

// x ln(x/y) - x + y for x >= 0, y > 0.
double relative_entropy(double x, double y)
{
    if (x == 0.0) return y;
    return y * entropy_gap((x - y) / y);
}

// relative_entropy(p, q) - relative_entropy(1+p, 1+q). Near p = q both terms
// are ~(p-q)^2 and their difference is summed termwise instead.
double bose_einstein_gap(double p, double q)
{
    const double u = (p - q) / q;
    if (std::abs(u) >= 1e-2) return relative_entropy(p, q) - relative_entropy(1.0 + p, 1.0 + q);
    const double log_ratio = std::log1p(-1.0 / (1.0 + q)); // ln(q / (1+q))
    double term = u * u;
    double sum = 0.0;
    double sign = 1.0;
    for (int n = 2; n <= 11; ++n) {
        sum += sign * term / (n * (n - 1.0)) * -std::expm1((n - 1) * log_ratio);
        term *= u;
        sign = -sign;
    }
    return q * sum;
}

void check_dimension(const DivergenceSpec& spec, Eigen::Index size)
{
    if (size != spec.dimension) {
        throw ShapeError("point has " + std::to_string(size) + " coordinates, divergence expects "
                         + std::to_string(spec.dimension));
    }
}

double clamp_scalar(const DivergenceSpec& spec, double x)
{
    const double floor = spec.domain_floor;
    if (!std::isfinite(x)) {
        throw DomainError("non-finite coordinate for divergence " + std::string(to_token(spec.kind)));
    }
    switch (spec.kind) {
    case DivergenceKind::SquaredLoss:
    case DivergenceKind::SquaredEuclidean:
        return x;
    case DivergenceKind::LogisticLoss:
        if (x < -floor || x > 1.0 + floor) {
            throw DomainError("coordinate " + std::to_string(x) + " outside [0,1]");
        }
        return std::clamp(x, floor, 1.0 - floor);
    case DivergenceKind::BoseEinstein:
    case DivergenceKind::ItakuraSaito:
    case DivergenceKind::KLDivergence:
    case DivergenceKind::GeneralizedI:
        if (x < -floor) {
            throw DomainError("negative coordinate " + std::to_string(x) + " for divergence "
                              + std::string(to_token(spec.kind)));
        }
        return std::max(x, floor);
    }
    return x;
}

double phi_scalar(DivergenceKind kind, double x)
{
    switch (kind) {
    case DivergenceKind::SquaredLoss:
    case DivergenceKind::SquaredEuclidean:
        return x * x;
    case DivergenceKind::LogisticLoss:
        return x * std::log(x) + (1.0 - x) * std::log1p(-x);
    case DivergenceKind::BoseEinstein:
        return x * std::log(x) - (1.0 + x) * std::log1p(x);
    case DivergenceKind::ItakuraSaito:
        return -std::log(x);
    case DivergenceKind::KLDivergence:
        return x * std::log(x) / kLn2;
    case DivergenceKind::GeneralizedI:
        return x * std::log(x);
    }
    return 0.0;
}

double grad_scalar(DivergenceKind kind, double x)
{
    switch (kind) {
    case DivergenceKind::SquaredLoss:
    case DivergenceKind::SquaredEuclidean:
        return 2.0 * x;
    case DivergenceKind::LogisticLoss:
        return std::log(x) - std::log1p(-x);
    case DivergenceKind::BoseEinstein:
        return std::log(x) - std::log1p(x);
    case DivergenceKind::ItakuraSaito:
        return -1.0 / x;
    case DivergenceKind::KLDivergence:
        return (std::log(x) + 1.0) / kLn2;
    case DivergenceKind::GeneralizedI:
        return 1.0 + std::log(x);
    }
    return 0.0;
}

double grad_inv_scalar(DivergenceKind kind, double g)
{
    if (!std::isfinite(g)) {
        throw RangeError("non-finite dual coordinate for divergence " + std::string(to_token(kind)));
    }
    switch (kind) {
    case DivergenceKind::SquaredLoss:
    case DivergenceKind::SquaredEuclidean:
        return 0.5 * g;
    case DivergenceKind::LogisticLoss:
        return 1.0 / (1.0 + std::exp(-g));
    case DivergenceKind::BoseEinstein:
        if (g >= 0.0) throw RangeError("Bose-Einstein gradient range is (-inf, 0)");
        return 1.0 / std::expm1(-g);
    case DivergenceKind::ItakuraSaito:
        if (g >= 0.0) throw RangeError("Itakura-Saito gradient range is (-inf, 0)");
        return -1.0 / g;
    case DivergenceKind::KLDivergence:
        return std::exp(g * kLn2 - 1.0);
    case DivergenceKind::GeneralizedI:
        return std::exp(g - 1.0);
    }
    return 0.0;
}

double bregman_scalar(DivergenceKind kind, double p, double q)
{
    switch (kind) {
    case DivergenceKind::SquaredLoss:
    case DivergenceKind::SquaredEuclidean:
        return (p - q) * (p - q);
    case DivergenceKind::LogisticLoss:
        return relative_entropy(p, q) + relative_entropy(1.0 - p, 1.0 - q);
    case DivergenceKind::BoseEinstein:
        return bose_einstein_gap(p, q);
    case DivergenceKind::ItakuraSaito:
        return log_gap((p - q) / q);
    case DivergenceKind::KLDivergence:
        return relative_entropy(p, q) / kLn2;
    case DivergenceKind::GeneralizedI:
        return relative_entropy(p, q);
    }
    return 0.0;
}

double curvature_scalar(DivergenceKind kind, double x)
{
    switch (kind) {
    case DivergenceKind::SquaredLoss:
    case DivergenceKind::SquaredEuclidean:
        return 2.0;
    case DivergenceKind::LogisticLoss:
        return 1.0 / (x * (1.0 - x));
    case DivergenceKind::BoseEinstein:
        return 1.0 / (x * (1.0 + x));
    case DivergenceKind::ItakuraSaito:
        return 1.0 / (x * x);
    case DivergenceKind::KLDivergence:
        return 1.0 / (x * kLn2);
    case DivergenceKind::GeneralizedI:
        return 1.0 / x;
    }
    return 0.0;
}

} // namespace

std::string_view to_token(DivergenceKind kind)
{
    switch (kind) {
    case DivergenceKind::SquaredLoss: return "squared";
    case DivergenceKind::LogisticLoss: return "logistic";
    case DivergenceKind::BoseEinstein: return "bose-einstein";
    case DivergenceKind::ItakuraSaito: return "itakura-saito";
    case DivergenceKind::SquaredEuclidean: return "euclidean";
    case DivergenceKind::KLDivergence: return "kl";
    case DivergenceKind::GeneralizedI: return "gen-i";
    }
    return "unknown";
}

std::optional<DivergenceKind> parse_divergence(std::string_view token)
{
    for (auto kind : kAllDivergences) {
        if (to_token(kind) == token) return kind;
    }
    return std::nullopt;
}

bool is_nonnegative_domain(DivergenceKind kind)
{
    return kind != DivergenceKind::SquaredLoss && kind != DivergenceKind::SquaredEuclidean;
}

bool is_log_based(DivergenceKind kind)
{
    return is_nonnegative_domain(kind);
}

double phi(const DivergenceSpec& spec, const PointRef& p)
{
    check_dimension(spec, p.size());
    double sum = 0.0;
    for (Eigen::Index l = 0; l < p.size(); ++l) {
        sum += phi_scalar(spec.kind, clamp_scalar(spec, p[l]));
    }
    return sum;
}

Point grad_phi(const DivergenceSpec& spec, const PointRef& p)
{
    check_dimension(spec, p.size());
    Point g(p.size());
    for (Eigen::Index l = 0; l < p.size(); ++l) {
        g[l] = grad_scalar(spec.kind, clamp_scalar(spec, p[l]));
    }
    return g;
}

Point grad_phi_inv(const DivergenceSpec& spec, const PointRef& g)
{
    check_dimension(spec, g.size());
    Point p(g.size());
    for (Eigen::Index l = 0; l < g.size(); ++l) {
        p[l] = grad_inv_scalar(spec.kind, g[l]);
    }
    return p;
}

double bregman(const DivergenceSpec& spec, const PointRef& p, const PointRef& q)
{
    check_dimension(spec, p.size());
    check_dimension(spec, q.size());
    double sum = 0.0;
    for (Eigen::Index l = 0; l < p.size(); ++l) {
        sum += bregman_scalar(spec.kind, clamp_scalar(spec, p[l]), clamp_scalar(spec, q[l]));
    }
    return sum;
}

double psi(const DivergenceSpec& spec, const PointRef& y)
{
    const Point p = grad_phi_inv(spec, y);
    return y.dot(p) - phi(spec, p);
}

double dual_bregman(const DivergenceSpec& spec, const PointRef& a, const PointRef& b)
{
    const Point grad_b = grad_phi_inv(spec, b);
    return psi(spec, a) - psi(spec, b) - (a - b).dot(grad_b);
}

Point curvature(const DivergenceSpec& spec, const PointRef& p)
{
    check_dimension(spec, p.size());
    Point h(p.size());
    for (Eigen::Index l = 0; l < p.size(); ++l) {
        h[l] = curvature_scalar(spec.kind, clamp_scalar(spec, p[l]));
    }
    return h;
}

Point clamp_point(const DivergenceSpec& spec, const PointRef& p)
{
    check_dimension(spec, p.size());
    Point out(p.size());
    for (Eigen::Index l = 0; l < p.size(); ++l) {
        out[l] = clamp_scalar(spec, p[l]);
    }
    return out;
}

void validate_point(const DivergenceSpec& spec, const PointRef& p)
{
    check_dimension(spec, p.size());
    for (Eigen::Index l = 0; l < p.size(); ++l) {
        clamp_scalar(spec, p[l]);
    }
    if (spec.kind == DivergenceKind::KLDivergence && std::abs(p.sum() - 1.0) > 1e-9) {
        throw DomainError("KL point does not sum to 1 (sum = " + std::to_string(p.sum()) + ")");
    }
}

} // namespace oac3
