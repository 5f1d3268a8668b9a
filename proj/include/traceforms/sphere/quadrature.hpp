#pragma once

#include <traceforms/rng.hpp>
#include <traceforms/sphere/sphere.hpp>

#include <numbers>
#include <vector>

namespace traceforms::sphere {

/// Nodes on a sphere with positive weights summing to its area. Nodes are
/// stored row-wise in `points` (one row per node).
struct QuadratureRule {
    Matrix points;
    Vector weights;
    int order = 0;  // polynomial exactness degree; 0 for Monte Carlo rules

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
    [[nodiscard]] Vector node(std::size_t i) const { return points.row(static_cast<Eigen::Index>(i)).transpose(); }

    /// Same rule with every node mapped to center + R (node - center).
    [[nodiscard]] QuadratureRule rotated(const Matrix& rot, const Vector& center) const {
        QuadratureRule q = *this;
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            q.points.row(i) = (rot * (points.row(i).transpose() - center) + center).transpose();
        }
        return q;
    }

    template <typename F>
    [[nodiscard]] double integrate(F&& f) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < size(); ++i) sum += weights(static_cast<Eigen::Index>(i)) * f(node(i));
        return sum;
    }
};

struct GaussLegendre {
    std::vector<double> x, w;
};

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
[[nodiscard]] inline GaussLegendre gauss_legendre(int n) {
    if (n < 1) throw InvalidInput("Gauss-Legendre rule needs at least one node");
    GaussLegendre g{std::vector<double>(static_cast<std::size_t>(n)), std::vector<double>(static_cast<std::size_t>(n))};
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double step = p1 / dp;
            z -= step;
            if (std::abs(step) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        g.x[static_cast<std::size_t>(i)] = -z;
        g.x[static_cast<std::size_t>(n - 1 - i)] = z;
        g.w[static_cast<std::size_t>(i)] = w;
        g.w[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    return g;
}

/// n = 3 product rule: Gauss-Legendre in cos(theta) with n_polar nodes times
/// 2 n_polar equispaced azimuths. Exact for spherical harmonics of degree
/// <= 2 n_polar - 1.
[[nodiscard]] inline QuadratureRule product_rule(const SphereSpec& s, int n_polar) {
    if (s.dim() != 3) throw InvalidInput("product_rule is defined for n = 3");
    const auto gl = gauss_legendre(n_polar);
    const int n_az = 2 * n_polar;
    QuadratureRule q;
    q.points.resize(static_cast<Eigen::Index>(n_polar) * n_az, 3);
    q.weights.resize(static_cast<Eigen::Index>(n_polar) * n_az);
    q.order = 2 * n_polar - 1;
    const double r = s.radius();
    const double dphi = 2.0 * std::numbers::pi / n_az;
    Eigen::Index k = 0;
    for (int i = 0; i < n_polar; ++i) {
        const double ct = gl.x[static_cast<std::size_t>(i)];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int j = 0; j < n_az; ++j, ++k) {
            const double phi = (j + 0.5) * dphi;
            q.points(k, 0) = s.center()(0) + r * st * std::cos(phi);
            q.points(k, 1) = s.center()(1) + r * st * std::sin(phi);
            q.points(k, 2) = s.center()(2) + r * ct;
            q.weights(k) = gl.w[static_cast<std::size_t>(i)] * dphi * r * r;
        }
    }
    return q;
}

/// Equal-weight rule from n_points uniform random nodes, symmetrized by
/// adding the antipode of every node. Any dimension.
[[nodiscard]] inline QuadratureRule monte_carlo_rule(const SphereSpec& s, std::size_t n_points, Rng& rng) {
    if (n_points == 0) throw InvalidInput("monte_carlo_rule needs at least one node");
    const int n = s.dim();
    QuadratureRule q;
    q.points.resize(static_cast<Eigen::Index>(2 * n_points), n);
    q.weights = Vector::Constant(static_cast<Eigen::Index>(2 * n_points), s.area() / static_cast<double>(2 * n_points));
    for (std::size_t i = 0; i < n_points; ++i) {
        Vector g(n);
        for (int d = 0; d < n; ++d) g(d) = rng.normal();
        g *= s.radius() / g.norm();
        q.points.row(static_cast<Eigen::Index>(2 * i)) = (s.center() + g).transpose();
        q.points.row(static_cast<Eigen::Index>(2 * i + 1)) = (s.center() - g).transpose();
    }
    return q;
}

} // namespace traceforms::sphere
