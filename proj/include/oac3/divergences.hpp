#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace oac3 {

using Point = Eigen::VectorXd;
using PointRef = Eigen::Ref<const Eigen::VectorXd>;

enum class DivergenceKind {
    SquaredLoss,      // R,            phi(p) = p^2
    LogisticLoss,     // [0,1],        phi(p) = p ln p + (1-p) ln(1-p)
    BoseEinstein,     // R+,           phi(p) = p ln p - (1+p) ln(1+p)
    ItakuraSaito,     // R++,          phi(p) = -ln p
    SquaredEuclidean, // R^k,          phi(p) = |p|^2
    KLDivergence,     // k-simplex,    phi(p) = sum p log2 p
    GeneralizedI,     // R+^k,         phi(p) = sum p ln p
};

inline constexpr std::array<DivergenceKind, 7> kAllDivergences = {
    DivergenceKind::SquaredLoss,      DivergenceKind::LogisticLoss,
    DivergenceKind::BoseEinstein,     DivergenceKind::ItakuraSaito,
    DivergenceKind::SquaredEuclidean, DivergenceKind::KLDivergence,
    DivergenceKind::GeneralizedI,
};

/// CLI token for a kind: squared, logistic, bose-einstein, itakura-saito,
/// euclidean, kl, gen-i.
std::string_view to_token(DivergenceKind kind);
std::optional<DivergenceKind> parse_divergence(std::string_view token);

/// True for rows whose domain is a subset of the nonnegative orthant.
bool is_nonnegative_domain(DivergenceKind kind);
/// True for rows whose generating function involves a logarithm.
bool is_log_based(DivergenceKind kind);

struct DivergenceSpec {
    DivergenceKind kind = DivergenceKind::GeneralizedI;
    double domain_floor = 1e-12;
    int dimension = 1;
};

// All scalar rows are extended to k dimensions by summing phi over
// coordinates, so every operation below works coordinatewise. Inputs that
// sit below a log-based domain boundary by at most domain_floor are clamped
// onto [domain_floor, ...]; anything further out raises DomainError.
// The simplex constraint of KLDivergence is not checked here: phi is
// evaluated on its natural extension to the positive orthant, and the
// solver is responsible for keeping KL copies on the simplex.

double phi(const DivergenceSpec& spec, const PointRef& p);
Point grad_phi(const DivergenceSpec& spec, const PointRef& p);
Point grad_phi_inv(const DivergenceSpec& spec, const PointRef& g);

/// d_phi(p, q) = phi(p) - phi(q) - <p - q, grad phi(q)>, evaluated through
/// cancellation-free closed forms.
double bregman(const DivergenceSpec& spec, const PointRef& p, const PointRef& q);

/// Legendre dual psi(y) = <y, grad_phi_inv(y)> - phi(grad_phi_inv(y)).
double psi(const DivergenceSpec& spec, const PointRef& y);

/// d_psi(a, b) = psi(a) - psi(b) - <a - b, grad_phi_inv(b)>, evaluated
/// literally from psi.
double dual_bregman(const DivergenceSpec& spec, const PointRef& a, const PointRef& b);

/// Diagonal of the Hessian of phi at p.
Point curvature(const DivergenceSpec& spec, const PointRef& p);

/// Clamps p onto the closed domain shrunk by domain_floor.
Point clamp_point(const DivergenceSpec& spec, const PointRef& p);

/// Checks that p lies in the domain within domain_floor (and on the simplex
/// within 1e-9 for KLDivergence); throws DomainError otherwise.
void validate_point(const DivergenceSpec& spec, const PointRef& p);

} // namespace oac3
