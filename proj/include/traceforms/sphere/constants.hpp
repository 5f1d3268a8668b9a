#pragma once

#include <traceforms/error.hpp>

#include <cmath>
#include <numbers>
#include <string>

namespace traceforms::sphere {

/// Surface area of the unit sphere in R^n: 2 pi^{n/2} / Gamma(n/2).
[[nodiscard]] inline double unit_sphere_area(int n) {
    if (n < 1) throw InvalidInput("unit_sphere_area: dimension must be >= 1");
    return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Normalizing constant of the symmetric alpha-stable jump kernel in R^n:
/// alpha 2^{alpha-1} Gamma((alpha+n)/2) / (pi^{n/2} Gamma(1 - alpha/2)).
[[nodiscard]] inline double stable_constant(int n, double alpha) {
    if (n < 1) throw InvalidInput("stable_constant: dimension must be >= 1");
    if (!(alpha > 0.0 && alpha < 2.0)) {
        throw AlphaOutOfRange("stable index alpha = " + std::to_string(alpha) + " outside (0, 2)");
    }
    return alpha * std::pow(2.0, alpha - 1.0) * std::tgamma(0.5 * (alpha + n)) /
           (std::pow(std::numbers::pi, 0.5 * n) * std::tgamma(1.0 - 0.5 * alpha));
}

} // namespace traceforms::sphere
