#pragma once

// Lattice discretizations of Brownian motion plus a symmetric stable jump
// part on a bounded box, used as exact finite test instances.
//
// With m(x) = h^n the chain energy is
//   E(f, f) = 1/2 sum_{x != y} h^n Q(x, y) (f(x) - f(y))^2
// so nearest-neighbour rates 1/(2h^2) give 1/2 |grad f|^2 dx and stable rates
// 2 A(n, -alpha) h^n / |x - y|^{n+alpha} give
//   A(n, -alpha) sum (f(x) - f(y))^2 / |x - y|^{n+alpha} dx dy.

#include <traceforms/chain/chain.hpp>
#include <traceforms/sphere/constants.hpp>

#include <functional>
#include <limits>

namespace traceforms::chain {

enum class KernelKind { laplacian, stable, mixed };

struct KernelSpec {
    KernelKind kind = KernelKind::laplacian;
    double alpha = 1.0;
    double cutoff = std::numeric_limits<double>::infinity();
};

struct GridSpec {
    int dim = 1;
    int sites_per_axis = 2;
    double spacing = 1.0;
    Vector lower;  // coordinates of the corner site; zero if left empty
};

using RegionPredicate = std::function<bool(const Vector&)>;

struct LatticeChain {
    SymmetricChain chain;
    SubsetSpec subset;
    std::vector<Vector> positions;
    GridSpec grid;
    KernelSpec kernel;
    double stable_const = 0.0;  // A(n, -alpha), zero for the pure laplacian
};

/// Closed unit ball at the origin together with a lattice shell of half width
/// h around the unit sphere centred at `shell_center`.
[[nodiscard]] inline RegionPredicate prototype_region(double h, Vector shell_center) {
    return [h, c = std::move(shell_center)](const Vector& x) {
        if (x.norm() <= 1.0 + 1e-12) return true;
        const double d = (x - c).norm();
        return d >= 1.0 - h - 1e-12 && d <= 1.0 + h + 1e-12;
    };
}

/// Stable jump rate between two sites at distance `dist`.
[[nodiscard]] inline double stable_rate(double a_const, int dim, double alpha, double h, double dist) {
    return 2.0 * a_const * std::pow(h, dim) / std::pow(dist, dim + alpha);
}

[[nodiscard]] inline LatticeChain lattice_chain_from_kernel(GridSpec grid, KernelSpec kernel, const RegionPredicate& in_f) {
    if (grid.dim < 1 || grid.sites_per_axis < 2 || !(grid.spacing > 0.0)) {
        throw DegenerateGrid("grid needs dim >= 1, at least 2 sites per axis and positive spacing");
    }
    if (grid.lower.size() == 0) grid.lower = Vector::Zero(grid.dim);
    if (grid.lower.size() != grid.dim) throw DegenerateGrid("grid corner has wrong dimension");
    const double h = grid.spacing;
    const bool use_stable = kernel.kind != KernelKind::laplacian;
    double a_const = 0.0;
    if (use_stable) {
        a_const = sphere::stable_constant(grid.dim, kernel.alpha);
        if (!(kernel.cutoff >= h)) throw InvalidInput("stable kernel cutoff must be at least the grid spacing");
    }

    std::size_t n = 1;
    for (int d = 0; d < grid.dim; ++d) n *= static_cast<std::size_t>(grid.sites_per_axis);
    std::vector<Vector> pos(n);
    std::vector<std::vector<int>> idx(n, std::vector<int>(static_cast<std::size_t>(grid.dim)));
    for (std::size_t s = 0; s < n; ++s) {
        std::size_t rem = s;
        pos[s] = grid.lower;
        for (int d = 0; d < grid.dim; ++d) {
            const int k = static_cast<int>(rem % static_cast<std::size_t>(grid.sites_per_axis));
            rem /= static_cast<std::size_t>(grid.sites_per_axis);
            idx[s][static_cast<std::size_t>(d)] = k;
            pos[s](d) += k * h;
        }
    }

    const auto ni = static_cast<Eigen::Index>(n);
    Matrix jumps = Matrix::Zero(ni, ni);
    const double nn_rate = 1.0 / (2.0 * h * h);
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = x + 1; y < n; ++y) {
            double rate = 0.0;
            if (kernel.kind != KernelKind::stable) {
                int l1 = 0;
                for (int d = 0; d < grid.dim; ++d) l1 += std::abs(idx[x][static_cast<std::size_t>(d)] - idx[y][static_cast<std::size_t>(d)]);
                if (l1 == 1) rate += nn_rate;
            }
            if (use_stable) {
                const double dist = (pos[x] - pos[y]).norm();
                if (dist <= kernel.cutoff * (1.0 + 1e-12)) rate += stable_rate(a_const, grid.dim, kernel.alpha, h, dist);
            }
            jumps(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = rate;
            jumps(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = rate;
        }
    }

    std::vector<std::size_t> f;
    for (std::size_t s = 0; s < n; ++s) {
        if (in_f(pos[s])) f.push_back(s);
    }
    if (f.empty()) throw EmptyTraceSet("region predicate selects no lattice site");

    const Vector m = Vector::Constant(ni, std::pow(h, grid.dim));
    auto chain = validate_chain(make_rate_matrix(jumps, Vector::Zero(ni)), m);
    SubsetSpec subset(n, std::move(f));
    return {std::move(chain), std::move(subset), std::move(pos), std::move(grid), kernel, a_const};
}

} // namespace traceforms::chain
