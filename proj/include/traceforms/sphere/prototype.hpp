#pragma once

// Trace energy of the ball-plus-sphere prototype assembled term by term on a
// lattice: gradient part inside F, stable jumps and Feller jumps between
// points of F, and supplementary killing.

#include <traceforms/chain/core.hpp>
#include <traceforms/chain/lattice.hpp>

namespace traceforms::sphere {

struct PrototypeEnergy {
    double gradient = 0.0;  // 1/2 int_F |grad phi|^2
    double jump = 0.0;      // sum over ordered pairs of (phi(x) - phi(y))^2 (U/2 + A h^{2n} / |x-y|^{n+alpha})
    double kill = 0.0;      // sum phi^2 V
    [[nodiscard]] double total() const { return gradient + jump + kill; }
};

/// `phi` is indexed like lat.subset.trace_set(); `feller` must be the Feller
/// data of the same lattice chain and trace set.
[[nodiscard]] inline PrototypeEnergy prototype_trace_energy(const chain::LatticeChain& lat, const Vector& phi,
                                                            const chain::FellerData* feller) {
    const auto& f = lat.subset.trace_set();
    const auto nf = static_cast<Eigen::Index>(f.size());
    if (phi.size() != nf) throw InvalidInput("phi must have one value per trace-set site");
    if (feller == nullptr) throw MissingFellerData("prototype energy needs Feller data for the trace set");
    if (feller->u.rows() != nf || feller->u.cols() != nf || feller->v.size() != nf) {
        throw MissingFellerData("Feller data does not match the trace set");
    }
    const int n = lat.grid.dim;
    const double h = lat.grid.spacing;
    const bool nn = lat.kernel.kind != chain::KernelKind::stable;
    const bool stable = lat.kernel.kind != chain::KernelKind::laplacian;
    const double hn = std::pow(h, n);

    PrototypeEnergy e;
    for (Eigen::Index a = 0; a < nf; ++a) {
        const Vector& xa = lat.positions[f[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < nf; ++b) {
            if (a == b) continue;
            const double d = phi(a) - phi(b);
            if (d == 0.0) continue;
            const Vector& xb = lat.positions[f[static_cast<std::size_t>(b)]];
            const double dist = (xa - xb).norm();
            if (nn && b > a && std::abs(dist - h) <= 1e-9 * h) e.gradient += 0.5 * std::pow(h, n - 2) * d * d;
            double w = 0.5 * feller->u(a, b);
            if (stable && dist <= lat.kernel.cutoff * (1.0 + 1e-12)) {
                w += lat.stable_const * hn * hn / std::pow(dist, n + lat.kernel.alpha);
            }
            e.jump += d * d * w;
        }
        e.kill += phi(a) * phi(a) * feller->v(a);
    }
    return e;
}

} // namespace traceforms::sphere
