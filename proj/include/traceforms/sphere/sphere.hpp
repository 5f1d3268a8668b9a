#pragma once

// Closed-form objects for Brownian motion and a sphere S of radius r in R^n,
// n >= 3: Poisson kernels from either side, the Feller kernel on S x S, the
// supplementary density and the escape probability from the exterior.

#include <traceforms/linalg.hpp>
#include <traceforms/sphere/constants.hpp>

namespace traceforms::sphere {

class SphereSpec {
public:
    SphereSpec(int n, double r, Vector center = {}) : n_(n), r_(r), center_(std::move(center)) {
        if (n < 3) throw InvalidInput("sphere dimension must be at least 3, got " + std::to_string(n));
        if (!(r > 0.0) || !std::isfinite(r)) throw InvalidInput("sphere radius must be positive");
        if (center_.size() == 0) center_ = Vector::Zero(n);
        if (center_.size() != n) throw InvalidInput("sphere center has the wrong dimension");
    }

    [[nodiscard]] int dim() const { return n_; }
    [[nodiscard]] double radius() const { return r_; }
    [[nodiscard]] const Vector& center() const { return center_; }
    [[nodiscard]] double area() const { return unit_sphere_area(n_) * std::pow(r_, n_ - 1); }
    /// Distance of x from the center.
    [[nodiscard]] double dist(const Vector& x) const { return (x - center_).norm(); }

private:
    int n_;
    double r_;
    Vector center_;
};

enum class Side { interior, exterior };

/// Relative distance from the sphere below which a point counts as on it.
inline constexpr double kBoundaryTol = 1e-12;

/// Density of the harmonic measure from x with respect to surface measure.
[[nodiscard]] inline double poisson_kernel(const SphereSpec& s, Side side, const Vector& x, const Vector& xi) {
    const double rho = s.dist(x);
    const double r = s.radius();
    if (std::abs(rho - r) <= kBoundaryTol * r) throw PointOnBoundary("x lies on the sphere");
    if (side == Side::interior && rho > r) throw InvalidInput("interior Poisson kernel needs x inside the sphere");
    if (side == Side::exterior && rho < r) throw InvalidInput("exterior Poisson kernel needs x outside the sphere");
    const double num = std::abs(r * r - rho * rho);
    return num / (unit_sphere_area(s.dim()) * r * std::pow((x - xi).norm(), s.dim()));
}

/// Feller kernel U(xi, eta) = (2 / Omega_n) |xi - eta|^{-n}.
[[nodiscard]] inline double feller_density(const SphereSpec& s, const Vector& xi, const Vector& eta) {
    const double d = (xi - eta).norm();
    if (d <= kBoundaryTol * s.radius()) throw CoincidentPoints("Feller kernel is singular on the diagonal");
    return 2.0 / unit_sphere_area(s.dim()) * std::pow(d, -s.dim());
}

/// Supplementary Feller density v = (n - 2) / (2r), constant on S.
[[nodiscard]] inline double supplementary_density(const SphereSpec& s) {
    return (s.dim() - 2) / (2.0 * s.radius());
}

/// Probability that Brownian motion from exterior x never hits S.
[[nodiscard]] inline double escape_probability(const SphereSpec& s, const Vector& x) {
    const double rho = s.dist(x);
    if (rho <= s.radius() * (1.0 + kBoundaryTol)) throw PointInsideOrOn("escape probability needs |x| > r");
    return 1.0 - std::pow(s.radius() / rho, s.dim() - 2);
}

} // namespace traceforms::sphere
