#pragma once

// Real orthonormal spherical harmonics on S^2 and boundary functions given by
// coefficients, samples, or both. Index of (l, m) is l^2 + l + m.

#include <traceforms/sphere/quadrature.hpp>

#include <cmath>
#include <optional>

namespace traceforms::sphere {

[[nodiscard]] constexpr int harmonic_index(int l, int m) { return l * l + l + m; }
[[nodiscard]] constexpr int harmonic_count(int max_degree) { return (max_degree + 1) * (max_degree + 1); }

/// Values of all real harmonics of degree <= L at the unit vector u.
[[nodiscard]] inline Vector real_harmonics(int max_degree, const Vector& u) {
    if (u.size() != 3) throw InvalidInput("spherical harmonics are implemented for n = 3");
    Vector y(harmonic_count(max_degree));
    const double theta = std::acos(std::clamp(u(2) / u.norm(), -1.0, 1.0));
    const double phi = std::atan2(u(1), u(0));
    for (int l = 0; l <= max_degree; ++l) {
        y(harmonic_index(l, 0)) = std::sph_legendre(static_cast<unsigned>(l), 0u, theta);
        for (int m = 1; m <= l; ++m) {
            // sph_legendre includes the (-1)^m phase; undo it so Y_{1,1} is a positive multiple of x1.
            const double sign = m % 2 ? -1.0 : 1.0;
            const double p = sign * std::numbers::sqrt2 * std::sph_legendre(static_cast<unsigned>(l), static_cast<unsigned>(m), theta);
            y(harmonic_index(l, m)) = p * std::cos(m * phi);
            y(harmonic_index(l, -m)) = p * std::sin(m * phi);
        }
    }
    return y;
}

/// phi on a sphere. Coefficients refer to harmonics of the unit direction
/// (xi - center) / r; samples live on the nodes of `rule`.
class BoundaryFunction {
public:
    static BoundaryFunction from_coefficients(int max_degree, Vector coeffs) {
        if (max_degree < 0 || coeffs.size() != harmonic_count(max_degree)) {
            throw InvalidInput("coefficient vector must have (L+1)^2 entries");
        }
        BoundaryFunction f;
        f.degree_ = max_degree;
        f.coeffs_ = std::move(coeffs);
        return f;
    }

    static BoundaryFunction from_samples(QuadratureRule rule, Vector values) {
        if (values.size() != static_cast<Eigen::Index>(rule.size())) throw InvalidInput("one sample per node required");
        if (!values.allFinite()) throw InvalidInput("boundary samples must be finite");
        BoundaryFunction f;
        f.rule_ = std::move(rule);
        f.samples_ = std::move(values);
        return f;
    }

    /// Single harmonic Y_{l,m} with unit coefficient.
    static BoundaryFunction harmonic(int l, int m) {
        Vector c = Vector::Zero(harmonic_count(l));
        c(harmonic_index(l, m)) = 1.0;
        return from_coefficients(l, std::move(c));
    }

    [[nodiscard]] bool has_coefficients() const { return coeffs_.has_value(); }
    [[nodiscard]] bool has_samples() const { return samples_.has_value(); }
    [[nodiscard]] int degree() const { return degree_; }
    [[nodiscard]] const Vector& coefficients() const { return *coeffs_; }
    [[nodiscard]] const Vector& samples() const { return *samples_; }
    [[nodiscard]] const QuadratureRule& rule() const { return *rule_; }

    [[nodiscard]] double evaluate(const SphereSpec& s, const Vector& xi) const {
        if (!coeffs_) throw InvalidInput("pointwise evaluation needs a coefficient view; project the samples first");
        return real_harmonics(degree_, xi - s.center()).dot(*coeffs_);
    }

    /// Least-squares projection of the samples onto harmonics of degree <= L.
    /// Throws UnresolvedExpansion if the fit misses a sample by more than
    /// tol * max(1, |samples|_inf).
    [[nodiscard]] BoundaryFunction projected(const SphereSpec& s, int max_degree, double tol = 1e-8) const {
        if (coeffs_ && degree_ <= max_degree) return *this;
        if (!samples_) throw UnresolvedExpansion("no samples to project");
        const auto& q = *rule_;
        Matrix basis(static_cast<Eigen::Index>(q.size()), harmonic_count(max_degree));
        for (std::size_t i = 0; i < q.size(); ++i) {
            basis.row(static_cast<Eigen::Index>(i)) = real_harmonics(max_degree, q.node(i) - s.center()).transpose();
        }
        const Vector c = basis.colPivHouseholderQr().solve(*samples_);
        const double miss = max_abs(basis * c - *samples_);
        const double scale = std::max(1.0, max_abs(*samples_));
        if (miss > tol * scale) {
            throw UnresolvedExpansion("samples are not resolved by harmonics of degree <= " + std::to_string(max_degree) +
                                      " (max residual " + std::to_string(miss) + ")");
        }
        BoundaryFunction f = *this;
        f.degree_ = max_degree;
        f.coeffs_ = c;
        return f;
    }

    /// Largest disagreement between the coefficient and sample views at nodes.
    [[nodiscard]] double view_mismatch(const SphereSpec& s) const {
        if (!coeffs_ || !samples_) return 0.0;
        double worst = 0.0;
        for (std::size_t i = 0; i < rule_->size(); ++i) {
            worst = std::max(worst, std::abs(evaluate(s, rule_->node(i)) - (*samples_)(static_cast<Eigen::Index>(i))));
        }
        return worst;
    }

private:
    int degree_ = -1;
    std::optional<Vector> coeffs_;
    std::optional<QuadratureRule> rule_;
    std::optional<Vector> samples_;
};

} // namespace traceforms::sphere
