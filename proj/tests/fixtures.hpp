#pragma once

// Shared test fixtures and independent oracles. Nothing here calls into the
// solver paths of traceforms::chain beyond validate_chain.

#include <traceforms/chain/chain.hpp>

#include <random>

namespace fixtures {

using traceforms::Matrix;
using traceforms::Vector;
using traceforms::chain::SymmetricChain;

/// C1: states {0,1,2}, m = 1, Q(0,1) = 1, Q(0,2) = 2, conservative.
inline SymmetricChain c1() {
    Matrix j = Matrix::Zero(3, 3);
    j(0, 1) = j(1, 0) = 1.0;
    j(0, 2) = j(2, 0) = 2.0;
    return traceforms::chain::validate_chain(traceforms::chain::make_rate_matrix(j, Vector::Zero(3)), Vector::Ones(3));
}

/// C2: C1 with kill rate 1 at state 0.
inline SymmetricChain c2() {
    Matrix j = Matrix::Zero(3, 3);
    j(0, 1) = j(1, 0) = 1.0;
    j(0, 2) = j(2, 0) = 2.0;
    Vector k = Vector::Zero(3);
    k(0) = 1.0;
    return traceforms::chain::validate_chain(traceforms::chain::make_rate_matrix(j, k), Vector::Ones(3));
}

struct RandomInstance {
    SymmetricChain chain;
    std::vector<std::size_t> f;
};

/// Random irreducible symmetric chain with n <= max_n states: a random
/// spanning tree plus extra edges, conductances c(x,y), rates c(x,y)/m(x),
/// random killing on roughly a third of the states unless `conservative`.
inline RandomInstance random_instance(std::mt19937_64& rng, int max_n = 40, bool conservative = false) {
    std::uniform_int_distribution<int> size_dist(3, max_n);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int n = size_dist(rng);
    Matrix c = Matrix::Zero(n, n);
    for (int x = 1; x < n; ++x) {
        std::uniform_int_distribution<int> parent(0, x - 1);
        const int p = parent(rng);
        c(x, p) = c(p, x) = 0.1 + 2.0 * unif(rng);
    }
    const double density = 3.0 / n;
    for (int x = 0; x < n; ++x)
        for (int y = x + 1; y < n; ++y)
            if (unif(rng) < density) c(x, y) = c(y, x) = 0.1 + 2.0 * unif(rng);
    Vector m(n);
    for (int x = 0; x < n; ++x) m(x) = 0.2 + 3.0 * unif(rng);
    Matrix jumps = m.cwiseInverse().asDiagonal() * c;
    Vector kill = Vector::Zero(n);
    if (!conservative) {
        for (int x = 0; x < n; ++x)
            if (unif(rng) < 0.33) kill(x) = 1.5 * unif(rng);
    }
    auto chain = traceforms::chain::validate_chain(traceforms::chain::make_rate_matrix(jumps, kill), m);

    std::vector<std::size_t> f;
    std::uniform_int_distribution<int> fsize(1, n - 1);
    const int k = fsize(rng);
    std::vector<std::size_t> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
    std::shuffle(all.begin(), all.end(), rng);
    f.assign(all.begin(), all.begin() + k);
    std::sort(f.begin(), f.end());
    return {std::move(chain), std::move(f)};
}

/// Hitting distribution on F by fixed-point iteration of the embedded jump
/// chain: h(x, .) = sum_y P(x, y) h(y, .) + P(x, .)|_F for x outside F.
inline Matrix oracle_hitting(const SymmetricChain& chain, const std::vector<std::size_t>& f) {
    const auto n = static_cast<Eigen::Index>(chain.size());
    std::vector<bool> in_f(static_cast<std::size_t>(n), false);
    for (auto x : f) in_f[x] = true;
    Matrix p = Matrix::Zero(n, n);
    for (Eigen::Index x = 0; x < n; ++x) {
        const double total = -chain.rates()(x, x);
        for (Eigen::Index y = 0; y < n; ++y)
            if (y != x) p(x, y) = chain.rates()(x, y) / total;
    }
    Matrix h = Matrix::Zero(n, static_cast<Eigen::Index>(f.size()));
    for (int it = 0; it < 200000; ++it) {
        Matrix next = Matrix::Zero(h.rows(), h.cols());
        for (Eigen::Index x = 0; x < n; ++x) {
            if (in_f[static_cast<std::size_t>(x)]) continue;
            for (Eigen::Index y = 0; y < n; ++y) {
                if (p(x, y) == 0.0) continue;
                if (in_f[static_cast<std::size_t>(y)]) {
                    const auto col = std::lower_bound(f.begin(), f.end(), static_cast<std::size_t>(y)) - f.begin();
                    next(x, col) += p(x, y);
                } else {
                    next.row(x) += p(x, y) * h.row(y);
                }
            }
        }
        const double change = (next - h).cwiseAbs().maxCoeff();
        h = next;
        if (change < 1e-16) break;
    }
    return h;  // rows indexed by full state; F rows are zero
}

} // namespace fixtures
