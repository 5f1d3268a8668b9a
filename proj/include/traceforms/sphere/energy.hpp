#pragma once

// Harmonic extensions off the sphere, their Dirichlet energy, and the Douglas
// integral of the boundary data with the Feller and supplementary kernels.

#include <traceforms/sphere/harmonics.hpp>

namespace traceforms::sphere {

/// H phi(x) for x off the sphere. With coefficients the degree-l part is
/// scaled by (rho/r)^l inside and (r/rho)^{l+n-2} outside; with samples only
/// the Poisson integral over the sample rule is used.
[[nodiscard]] inline double harmonic_extension(const SphereSpec& s, const BoundaryFunction& phi, const Vector& x) {
    const double rho = s.dist(x);
    const double r = s.radius();
    if (std::abs(rho - r) <= kBoundaryTol * r) throw PointOnBoundary("harmonic extension is evaluated off the sphere");
    const Side side = rho < r ? Side::interior : Side::exterior;
    if (phi.has_coefficients()) {
        const int big_l = phi.degree();
        const Vector y = rho > 0.0 ? real_harmonics(big_l, x - s.center()) : Vector(real_harmonics(big_l, Vector::Unit(3, 2)));
        double sum = 0.0;
        for (int l = 0; l <= big_l; ++l) {
            const double mult = side == Side::interior ? std::pow(rho / r, l) : std::pow(r / rho, l + s.dim() - 2);
            for (int m = -l; m <= l; ++m) sum += mult * phi.coefficients()(harmonic_index(l, m)) * y(harmonic_index(l, m));
        }
        return sum;
    }
    const auto& q = phi.rule();
    double sum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        sum += q.weights(ii) * poisson_kernel(s, side, x, q.node(i)) * phi.samples()(ii);
    }
    return sum;
}

/// 1/2 int_{R^n} |grad H phi|^2 from the interior and exterior
/// Dirichlet-to-Neumann eigenvalues l/r and (l+n-2)/r.
[[nodiscard]] inline double dirichlet_energy(const SphereSpec& s, const BoundaryFunction& phi) {
    if (!phi.has_coefficients()) throw UnresolvedExpansion("dirichlet_energy needs a harmonic expansion; project first");
    const double r = s.radius();
    const int n = s.dim();
    double e = 0.0;
    for (int l = 0; l <= phi.degree(); ++l) {
        double norm2 = 0.0;
        for (int m = -l; m <= l; ++m) norm2 += std::pow(phi.coefficients()(harmonic_index(l, m)), 2);
        e += (2.0 * l + n - 2) / r * std::pow(r, n - 1) * norm2;
    }
    return 0.5 * e;
}

/// The same energy by volume quadrature of |grad H phi|^2 with central
/// differences: Gauss-Legendre in rho on (0, r) and in s = r/rho on (0, 1)
/// for the exterior, times a product rule on each sphere |x| = rho.
[[nodiscard]] inline double dirichlet_energy_volume(const SphereSpec& s, const BoundaryFunction& phi, int n_radial = 48,
                                                    int n_polar = 0) {
    if (s.dim() != 3) throw InvalidInput("volume quadrature is implemented for n = 3");
    if (!phi.has_coefficients()) throw UnresolvedExpansion("volume energy needs a harmonic expansion");
    if (n_polar <= 0) n_polar = phi.degree() + 4;
    const SphereSpec unit(3, 1.0);
    const auto dirs = product_rule(unit, n_polar);
    const auto gl = gauss_legendre(n_radial);
    const double r = s.radius();
    const double h = 1e-5 * r;

    auto grad2 = [&](const Vector& x) {
        double g2 = 0.0;
        for (int d = 0; d < 3; ++d) {
            Vector xp = x, xm = x;
            xp(d) += h;
            xm(d) -= h;
            const double g = (harmonic_extension(s, phi, xp) - harmonic_extension(s, phi, xm)) / (2.0 * h);
            g2 += g * g;
        }
        return g2;
    };
    auto shell = [&](double rho) {
        double sum = 0.0;
        for (std::size_t i = 0; i < dirs.size(); ++i) {
            sum += dirs.weights(static_cast<Eigen::Index>(i)) * grad2(s.center() + rho * dirs.node(i));
        }
        return sum;
    };

    double total = 0.0;
    for (std::size_t k = 0; k < gl.x.size(); ++k) {
        const double t = 0.5 * (gl.x[k] + 1.0);  // in (0, 1)
        const double w = 0.5 * gl.w[k];
        const double rho_in = r * t;
        total += w * r * rho_in * rho_in * shell(rho_in);
        const double rho_out = r / t;
        total += w * (r / (t * t)) * rho_out * rho_out * shell(rho_out);
    }
    return 0.5 * total;
}

struct DouglasParts {
    double jump = 0.0;  // 1/2 sum_{i != j} w_i w_j (phi_i - phi_j)^2 U(xi_i, xi_j)
    double kill = 0.0;  // v sum_i w_i phi_i^2
    [[nodiscard]] double total() const { return jump + kill; }
};

/// Plain pair sum of the Douglas integral on one rule, coincident pairs dropped.
[[nodiscard]] inline DouglasParts douglas_pair_sum(const SphereSpec& s, const QuadratureRule& q, const Vector& values) {
    const auto m = static_cast<Eigen::Index>(q.size());
    if (values.size() != m) throw InvalidInput("one value per node required");
    const int n = s.dim();
    const double c = 2.0 / unit_sphere_area(n);
    const double tiny = kBoundaryTol * s.radius();
    // Row-major copy for a cache-friendly inner loop.
    std::vector<double> pts(static_cast<std::size_t>(m * n));
    for (Eigen::Index i = 0; i < m; ++i)
        for (int d = 0; d < n; ++d) pts[static_cast<std::size_t>(i * n + d)] = q.points(i, d);

    DouglasParts out;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double* pi = &pts[static_cast<std::size_t>(i * n)];
        const double fi = values(i);
        double row = 0.0;
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double df = fi - values(j);
            if (df == 0.0) continue;
            const double* pj = &pts[static_cast<std::size_t>(j * n)];
            double d2 = 0.0;
            for (int d = 0; d < n; ++d) d2 += (pi[d] - pj[d]) * (pi[d] - pj[d]);
            if (d2 <= tiny * tiny) continue;
            const double dn = n == 3 ? d2 * std::sqrt(d2) : std::pow(d2, 0.5 * n);
            row += q.weights(j) * df * df / dn;
        }
        out.jump += q.weights(i) * row;
        out.kill += q.weights(i) * fi * fi;
    }
    out.jump *= c;  // i < j counts each unordered pair once, which is 1/2 of the ordered sum
    out.kill *= supplementary_density(s);
    return out;
}

struct DouglasResult {
    DouglasParts parts;  // extrapolated from the 2N and N rules
    DouglasParts check;  // extrapolated from the N and N/2 rules
    DouglasParts fine;   // raw sums on the 2N rule
    int order = 0;       // N, the middle n_polar
    [[nodiscard]] double value() const { return parts.total(); }
};

inline constexpr double kCoarseTol = 1e-2;

/// Douglas integral of an evaluable phi on n = 3 product rules. The pair sum
/// misses a ring around the diagonal, an O(1/N) error removed by
/// 2 D(2N) - D(N). The same extrapolation from N/2 and N must agree within
/// kCoarseTol, otherwise QuadratureTooCoarse.
template <typename Phi>
[[nodiscard]] DouglasResult douglas_integral(const SphereSpec& s, Phi&& phi, int n_polar) {
    if (n_polar < 4) throw InvalidInput("douglas_integral needs n_polar >= 4");
    auto sums = [&](int np) {
        const auto q = product_rule(s, np);
        Vector v(static_cast<Eigen::Index>(q.size()));
        for (std::size_t i = 0; i < q.size(); ++i) v(static_cast<Eigen::Index>(i)) = phi(q.node(i));
        return douglas_pair_sum(s, q, v);
    };
    auto extrapolate = [](const DouglasParts& coarse, const DouglasParts& fine) {
        return DouglasParts{2.0 * fine.jump - coarse.jump, fine.kill};
    };
    const auto half = sums(n_polar / 2);
    const auto mid = sums(n_polar);
    DouglasResult r;
    r.order = n_polar;
    r.fine = sums(2 * n_polar);
    r.check = extrapolate(half, mid);
    r.parts = extrapolate(mid, r.fine);
    const double gap = std::abs(r.check.total() - r.parts.total());
    if (gap > kCoarseTol * std::max(std::abs(r.parts.total()), 1e-300)) {
        throw QuadratureTooCoarse("Douglas estimates from n_polar " + std::to_string(n_polar / 2) + "/" +
                                  std::to_string(n_polar) + " and " + std::to_string(n_polar) + "/" +
                                  std::to_string(2 * n_polar) + " differ by " + std::to_string(gap));
    }
    return r;
}

[[nodiscard]] inline DouglasResult douglas_integral(const SphereSpec& s, const BoundaryFunction& phi, int n_polar,
                                                    int max_degree = 8) {
    const auto f = phi.projected(s, max_degree);
    return douglas_integral(s, [&](const Vector& xi) { return f.evaluate(s, xi); }, n_polar);
}

struct DouglasIdentityResult {
    double lhs = 0.0;  // Dirichlet energy of the harmonic extension
    double rhs = 0.0;  // Douglas integral
    double residual = 0.0;
    int order = 0;
    DouglasResult douglas;
};

/// |E(H phi) - Douglas(phi)| / E(H phi); an exact zero energy gives the
/// absolute difference instead.
[[nodiscard]] inline DouglasIdentityResult verify_douglas_identity(const SphereSpec& s, const BoundaryFunction& phi, int n_polar = 35,
                                                int max_degree = 8) {
    const auto f = phi.projected(s, max_degree);
    DouglasIdentityResult r;
    r.lhs = dirichlet_energy(s, f);
    r.douglas = douglas_integral(s, f, n_polar, max_degree);
    r.rhs = r.douglas.value();
    r.order = n_polar;
    r.residual = r.lhs != 0.0 ? std::abs(r.lhs - r.rhs) / std::abs(r.lhs) : std::abs(r.rhs);
    return r;
}

} // namespace traceforms::sphere
