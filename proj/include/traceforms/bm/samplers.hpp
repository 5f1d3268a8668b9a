#pragma once

// Hitting positions of Brownian motion on a sphere S = {|x - c| = r}.
// From inside and, for n = 3, from outside the law has a closed-form polar
// CDF; in the annulus r < |x| < R the walk-on-spheres sampler is used.

#include <traceforms/rng.hpp>
#include <traceforms/sphere/sphere.hpp>

#include <algorithm>
#include <numbers>
#include <optional>
#include <string>

namespace traceforms::bm {

using sphere::SphereSpec;

struct HitSample {
    Vector point;          // on S unless escaped; last position otherwise
    bool escaped = false;  // reached the outer sphere |x - c| = R
    std::size_t steps = 0;
};

struct ShellConfig {
    double eps = 0.05;
    double kill_radius = 100.0;
    std::size_t max_steps = 1'000'000;
    double tol = 1e-8;  // termination distance, relative to r

    void validate(const SphereSpec& s) const {
        const double r = s.radius();
        if (!(eps > 0.0 && eps < r)) throw InvalidInput("shell offset eps must lie in (0, r)");
        if (!(kill_radius > 2.0 * r)) throw InvalidInput("kill radius must exceed 2r");
        if (max_steps == 0) throw InvalidInput("max_steps must be positive");
        if (!(tol > 0.0 && tol < 1e-2)) throw InvalidInput("walk tolerance must lie in (0, 1e-2)");
    }
};

/// Uniform point on the unit sphere in R^n.
[[nodiscard]] inline Vector uniform_direction(int n, Rng& rng) {
    Vector g(n);
    double norm2 = 0.0;
    do {
        for (int d = 0; d < n; ++d) g(d) = rng.normal();
        norm2 = g.squaredNorm();
    } while (norm2 == 0.0);
    return g / std::sqrt(norm2);
}

namespace detail {

/// Orthonormal pair completing the unit vector a to a basis of R^3.
inline std::pair<Vector, Vector> complement_basis(const Vector& a) {
    Vector helper = Vector::Zero(3);
    helper(std::abs(a(0)) < 0.9 ? 0 : 1) = 1.0;
    Vector b = helper - helper.dot(a) * a;
    b.normalize();
    Vector c(3);
    c << a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0);
    return {b, c};
}

/// n = 3 draw from the density proportional to |x - xi|^{-3} on S, valid from
/// either side. With a = |x - c| and t the cosine between x - c and xi - c,
/// d(t) = (a^2 + r^2 - 2art)^{-1/2} is an unnormalized CDF in t.
inline Vector polar_draw(const SphereSpec& s, const Vector& x, Rng& rng) {
    const double r = s.radius();
    const Vector rel = x - s.center();
    const double a = rel.norm();
    Vector axis = Vector::Unit(3, 2);
    if (a > 0.0) axis = rel / a;
    const auto [b, c] = complement_basis(axis);
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    double t = 2.0 * rng.uniform() - 1.0;  // uniform law from the center
    if (a > 0.0) {
        const double lo = 1.0 / (a + r);
        const double hi = 1.0 / std::abs(a - r);
        const double w = rng.uniform() * (hi - lo) + lo;
        t = std::clamp((a * a + r * r - 1.0 / (w * w)) / (2.0 * a * r), -1.0, 1.0);
    }
    const double st = std::sqrt(std::max(0.0, 1.0 - t * t));
    return s.center() + r * (t * axis + st * (std::cos(phi) * b + std::sin(phi) * c));
}

} // namespace detail

/// Exact draw of the first hitting point of S from an interior point (n = 3).
[[nodiscard]] inline HitSample sample_hit_from_inside(const SphereSpec& s, const Vector& x, Rng& rng) {
    if (s.dim() != 3) throw InvalidInput("closed-form hitting sampler is implemented for n = 3");
    const double rho = s.dist(x);
    if (rho >= s.radius() * (1.0 - sphere::kBoundaryTol)) throw InvalidInput("start point must be strictly inside the sphere");
    return {detail::polar_draw(s, x, rng), false, 1};
}

/// Exact draw from an exterior point of R^n, n = 3: escape with probability
/// 1 - r/|x|, otherwise a point from the normalized exterior Poisson kernel.
[[nodiscard]] inline HitSample sample_hit_exterior_exact(const SphereSpec& s, const Vector& x, Rng& rng) {
    if (s.dim() != 3) throw InvalidInput("closed-form hitting sampler is implemented for n = 3");
    const double rho = s.dist(x);
    if (rho <= s.radius() * (1.0 + sphere::kBoundaryTol)) throw PointInsideOrOn("start point must be outside the sphere");
    if (rng.uniform() >= s.radius() / rho) return {x, true, 1};
    return {detail::polar_draw(s, x, rng), false, 1};
}

/// Walk-on-spheres in the annulus r < |y - c| < R. Stops within tol * r of
/// either sphere; inner hits are projected onto S.
[[nodiscard]] inline HitSample sample_hit_from_outside(const SphereSpec& s, const Vector& x, const ShellConfig& cfg,
                                                       Rng& rng) {
    const double r = s.radius();
    const double big_r = cfg.kill_radius;
    const double tol = cfg.tol * r;
    const double rho0 = s.dist(x);
    if (!(rho0 > r) || !(rho0 < big_r)) throw InvalidInput("start point must lie strictly inside the annulus");
    Vector y = x;
    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        const double rho = s.dist(y);
        const double inner = rho - r;
        const double outer = big_r - rho;
        if (inner <= tol) {
            const Vector rel = y - s.center();
            return {s.center() + rel * (r / rel.norm()), false, step};
        }
        if (outer <= tol) return {y, true, step};
        y += std::min(inner, outer) * uniform_direction(s.dim(), rng);
    }
    throw MaxStepsExceeded("walk-on-spheres did not terminate within " + std::to_string(cfg.max_steps) + " steps");
}

/// Annulus hitting probability of the inner sphere.
[[nodiscard]] inline double annulus_hit_probability(const SphereSpec& s, double rho, double big_r) {
    const double k = s.dim() - 2;
    return (std::pow(rho, -k) - std::pow(big_r, -k)) / (std::pow(s.radius(), -k) - std::pow(big_r, -k));
}

/// Hitting law in all of R^n: a walk that reaches the outer sphere comes back
/// with probability (r/R)^{n-2}, and is then continued from its escape point
/// with the closed-form exterior sampler.
[[nodiscard]] inline HitSample sample_hit_unbounded(const SphereSpec& s, const Vector& x, const ShellConfig& cfg,
                                                    Rng& rng) {
    auto h = sample_hit_from_outside(s, x, cfg, rng);
    if (!h.escaped) return h;
    if (rng.uniform() >= std::pow(s.radius() / cfg.kill_radius, s.dim() - 2)) return h;
    // Given a return, the first hit has the exterior Poisson law from the escape point.
    Vector p = detail::polar_draw(s, h.point, rng);
    return {std::move(p), false, h.steps + 1};
}

enum class Launch { inward, outward };

/// Start at xi displaced by eps along the inward or outward normal and run
/// to the next hit of S. Empty when the walk escapes to infinity.
[[nodiscard]] inline std::optional<Vector> excursion_pair_sampler(const SphereSpec& s, const Vector& xi, Launch side,
                                                                  const ShellConfig& cfg, Rng& rng) {
    const Vector normal = (xi - s.center()) / s.dist(xi);
    if (side == Launch::inward) return sample_hit_from_inside(s, xi - cfg.eps * normal, rng).point;
    auto h = sample_hit_unbounded(s, xi + cfg.eps * normal, cfg, rng);
    if (h.escaped) return std::nullopt;
    return std::move(h.point);
}

} // namespace traceforms::bm
