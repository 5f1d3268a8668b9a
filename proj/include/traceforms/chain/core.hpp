#pragma once

// Exact Feller measures, trace forms and Beurling-Deny data for finite
// symmetric chains. On a finite state space every limit defining these
// objects collapses to a closed matrix expression:
//
//   H        = (-Q00)^{-1} Q0F                 hitting distribution on F
//   q        = 1 - H 1                         escape probability
//   U(a, b)  = sum_x m(x) Q(x, a) H(x, b)      Feller measure
//   V(a)     = sum_x m(x) Q(x, a) q(x)         supplementary Feller measure
//   Qcheck   = QFF + QF0 H                     trace generator (Schur complement)

#include <traceforms/chain/chain.hpp>

#include <cmath>
#include <optional>
#include <vector>

namespace traceforms::chain {

/// Block decomposition of Q relative to F, with the factorized killed generator.
struct KilledBlocks {
    SubsetSpec subset;
    Matrix q00, q0f, qf0, qff;
    Vector m0, mf;
    Vector kill0, killf;
    RefinedSolver neg_q00;  // factorization of -Q00
};

[[nodiscard]] inline KilledBlocks split_blocks(const SymmetricChain& chain, const SubsetSpec& subset) {
    if (subset.n_states() != chain.size()) {
        throw InvalidInput("subset was built for " + std::to_string(subset.n_states()) + " states, chain has " +
                           std::to_string(chain.size()));
    }
    const auto& f = subset.trace_set();
    const auto& e0 = subset.complement();
    KilledBlocks b{subset,
                   gather(chain.rates(), e0, e0),
                   gather(chain.rates(), e0, f),
                   gather(chain.rates(), f, e0),
                   gather(chain.rates(), f, f),
                   gather(chain.weights(), e0),
                   gather(chain.weights(), f),
                   gather(chain.kill_rates(), e0),
                   gather(chain.kill_rates(), f),
                   {}};
    try {
        b.neg_q00 = RefinedSolver(-b.q00);
    } catch (const SingularKilledGenerator& e) {
        throw SingularKilledGenerator(std::string("-Q00 is singular; F fails the capacity condition: ") + e.what());
    }
    return b;
}

struct HittingData {
    Matrix h;                     // E0 x F
    Vector q;                     // E0
    std::vector<double> alphas;
    std::vector<Matrix> h_alpha;  // one E0 x F matrix per alpha

    [[nodiscard]] const Matrix& at_alpha(double alpha) const {
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            if (alphas[i] == alpha) return h_alpha[i];
        }
        throw InvalidInput("alpha " + std::to_string(alpha) + " was not computed");
    }
};

[[nodiscard]] inline HittingData hitting_operator(const KilledBlocks& b, std::vector<double> alphas = {}) {
    HittingData d;
    d.h = b.neg_q00.solve(b.q0f);
    // 1 - H1 equals the killed potential of the kill rate; solving for it avoids cancellation.
    d.q = b.neg_q00.solve(b.kill0);
    d.alphas = std::move(alphas);
    for (double alpha : d.alphas) {
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
            throw InvalidInput("alpha must be finite and nonnegative");
        }
        if (alpha == 0.0) {
            d.h_alpha.push_back(d.h);
            continue;
        }
        const Matrix shifted = alpha * Matrix::Identity(b.q00.rows(), b.q00.cols()) - b.q00;
        d.h_alpha.push_back(RefinedSolver(shifted).solve(b.q0f));
    }
    return d;
}

/// Tolerance of the excessiveness test, relative to ||f||_inf times the
/// largest holding rate in E0.
inline constexpr double kExcessiveTol = 1e-12;

/// L(f, g) = sum_{x in E0} m(x) (-Q00 f)(x) g(x) for f excessive for the killed chain.
[[nodiscard]] inline double energy_functional(const KilledBlocks& b, const Vector& f, const Vector& g) {
    if (f.size() != b.q00.rows() || g.size() != b.q00.rows()) {
        throw InvalidInput("energy_functional: vectors must live on E0");
    }
    const Vector gen = b.q00 * f;
    const double rate = std::max(max_abs(b.q00.diagonal()), 1e-300);
    const double tol = kExcessiveTol * rate * std::max(max_abs(f), 1e-300);
    std::string bad;
    for (Eigen::Index i = 0; i < gen.size(); ++i) {
        if (gen(i) > tol) {
            bad += " " + std::to_string(b.subset.complement()[static_cast<std::size_t>(i)]);
        }
    }
    if (!bad.empty()) {
        throw NotExcessive("Q00 f > 0 at states:" + bad);
    }
    return (b.m0.array() * (-gen).array() * g.array()).sum();
}

/// Zero-order potential G0 nu = (-Q00)^{-1} (nu / m0).
[[nodiscard]] inline Vector zero_order_potential(const KilledBlocks& b, const Vector& nu) {
    if (nu.size() != b.q00.rows()) throw InvalidInput("nu must live on E0");
    if (nu.size() > 0 && nu.minCoeff() < 0.0) throw InvalidInput("nu must be nonnegative");
    const Vector density = nu.cwiseQuotient(b.m0);
    return b.neg_q00.solve(density);
}

enum class Provenance { exact, monte_carlo };

struct FellerData {
    Matrix u;                    // F x F, diagonal retained
    Vector v;                    // F
    std::vector<double> alphas;
    std::vector<Matrix> u_alpha;
    Provenance provenance = Provenance::exact;
};

[[nodiscard]] inline FellerData feller_measures(const KilledBlocks& b, const HittingData& hit) {
    FellerData d;
    const Matrix weighted = b.m0.asDiagonal() * b.q0f;  // m(x) Q(x, a)
    d.u = weighted.transpose() * hit.h;
    d.v = weighted.transpose() * hit.q;
    d.alphas = hit.alphas;
    for (std::size_t i = 0; i < hit.alphas.size(); ++i) {
        const double alpha = hit.alphas[i];
        if (alpha == 0.0) {
            d.u_alpha.push_back(Matrix::Zero(d.u.rows(), d.u.cols()));
            continue;
        }
        d.u_alpha.push_back(alpha * hit.h_alpha[i].transpose() * b.m0.asDiagonal() * hit.h);
    }
    return d;
}

[[nodiscard]] inline FellerData feller_measures(const SymmetricChain& chain, const SubsetSpec& subset,
                                                std::vector<double> alphas = {}) {
    const auto b = split_blocks(chain, subset);
    return feller_measures(b, hitting_operator(b, std::move(alphas)));
}

struct JumpKill {
    Matrix j;      // n x n, zero diagonal
    Vector kappa;  // n
};

/// Jumping and killing measures J = m Q / 2 (off diagonal), kappa = m k.
[[nodiscard]] inline JumpKill beurling_deny(const SymmetricChain& chain) {
    JumpKill out;
    out.j = 0.5 * chain.weights().asDiagonal() * chain.rates();
    out.j.diagonal().setZero();
    out.kappa = chain.weights().cwiseProduct(chain.kill_rates());
    return out;
}

/// E(f, g) = sum_x m(x) (-Q f)(x) g(x).
[[nodiscard]] inline double dirichlet_form(const SymmetricChain& chain, const Vector& f, const Vector& g) {
    return (chain.weights().array() * (-(chain.rates() * f)).array() * g.array()).sum();
}

struct EnergyMeasure {
    Vector jump_part;
    Vector kill_part;
    Vector local_part;  // identically zero for chains

    /// mu<f>(x) with the killing contribution included.
    [[nodiscard]] Vector total() const { return jump_part + kill_part + local_part; }
};

[[nodiscard]] inline EnergyMeasure energy_measure(const SymmetricChain& chain, const Vector& f) {
    const auto n = static_cast<Eigen::Index>(chain.size());
    if (f.size() != n) throw InvalidInput("energy_measure: f must be a full-state vector");
    EnergyMeasure e;
    e.jump_part = Vector::Zero(n);
    for (Eigen::Index x = 0; x < n; ++x) {
        double s = 0.0;
        for (Eigen::Index y = 0; y < n; ++y) {
            if (y == x) continue;
            const double d = f(y) - f(x);
            s += chain.rates()(x, y) * d * d;
        }
        e.jump_part(x) = chain.weights()(x) * s;
    }
    e.kill_part = chain.weights().cwiseProduct(chain.kill_rates()).cwiseProduct(f.cwiseProduct(f));
    e.local_part = Vector::Zero(n);
    return e;
}

/// Full-state vector equal to u on F and H u on E0.
[[nodiscard]] inline Vector harmonic_extension(const KilledBlocks& b, const HittingData& hit, const Vector& u) {
    const auto& s = b.subset;
    if (u.size() != static_cast<Eigen::Index>(s.trace_set().size())) throw InvalidInput("u must live on F");
    Vector out(static_cast<Eigen::Index>(s.n_states()));
    const Vector hu = hit.h * u;
    for (std::size_t i = 0; i < s.trace_set().size(); ++i) out(static_cast<Eigen::Index>(s.trace_set()[i])) = u(static_cast<Eigen::Index>(i));
    for (std::size_t i = 0; i < s.complement().size(); ++i) out(static_cast<Eigen::Index>(s.complement()[i])) = hu(static_cast<Eigen::Index>(i));
    return out;
}

/// Extension operator P (n x |F|) with P u = harmonic_extension(u).
[[nodiscard]] inline Matrix extension_operator(const KilledBlocks& b, const HittingData& hit) {
    const auto& s = b.subset;
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(s.n_states()), static_cast<Eigen::Index>(s.trace_set().size()));
    for (std::size_t i = 0; i < s.trace_set().size(); ++i) p(static_cast<Eigen::Index>(s.trace_set()[i]), static_cast<Eigen::Index>(i)) = 1.0;
    for (std::size_t i = 0; i < s.complement().size(); ++i) p.row(static_cast<Eigen::Index>(s.complement()[i])) = hit.h.row(static_cast<Eigen::Index>(i));
    return p;
}

/// Largest m(x)|Q(x,x)|: the size of the individual terms entering any energy
/// of a function bounded by one. Residuals are floored at this scale.
[[nodiscard]] inline double energy_unit(const SymmetricChain& chain) {
    return std::max(max_abs(chain.weights().cwiseProduct(chain.rates().diagonal())), 1e-300);
}

struct TraceDecomposition {
    Matrix a;              // trace form: E_check(u, v) = u^T A v (Schur route)
    Matrix a_harmonic;     // same form via E(Hu, Hv)
    double route_residual; // max |a - a_harmonic| / max |a|
    Matrix qcheck;         // Schur complement QFF - QF0 Q00^{-1} Q0F
    Matrix generator;      // generator of the mu-time-changed process: -diag(mu)^{-1} A
    Matrix jhat;           // zero diagonal
    Vector kappahat;
    Vector mu;
};

inline constexpr double kRouteTol = 1e-12;
inline constexpr double kIdentityTol = 1e-10;

[[nodiscard]] inline TraceDecomposition trace_form(const KilledBlocks& b, const HittingData& hit,
                                                   const SymmetricChain& chain, const Vector& mu,
                                                   double route_tol = kRouteTol) {
    const auto nf = static_cast<Eigen::Index>(b.subset.trace_set().size());
    if (mu.size() != nf) throw InvalidInput("mu must have one weight per state of F");
    if (mu.minCoeff() <= 0.0) throw NonPositiveDensity("time-change weights mu must be strictly positive on F");

    TraceDecomposition t;
    t.mu = mu;
    t.qcheck = b.qff + b.qf0 * hit.h;
    t.a = -(b.mf.asDiagonal() * t.qcheck);

    const Matrix p = extension_operator(b, hit);
    const Matrix energy = -(chain.weights().asDiagonal() * chain.rates());
    t.a_harmonic = p.transpose() * energy * p;
    // A is a difference of terms of size m|Q|, so cancellation is measured against that.
    const double unit = energy_unit(chain);
    t.route_residual = max_abs(t.a - t.a_harmonic) / std::max({max_abs(t.a), max_abs(t.a_harmonic), unit});
    if (t.route_residual > route_tol) {
        throw IdentityViolation("trace form routes disagree: relative residual " + std::to_string(t.route_residual));
    }

    const double scale = std::max(max_abs(t.qcheck), 1e-300);
    for (Eigen::Index i = 0; i < nf; ++i) {
        for (Eigen::Index j = 0; j < nf; ++j) {
            if (i != j && t.qcheck(i, j) < -1e-12 * scale) {
                throw NonMarkovTrace("trace generator has negative off-diagonal entry at (" + std::to_string(i) + "," +
                                     std::to_string(j) + ")");
            }
        }
    }

    t.generator = -(mu.cwiseInverse().asDiagonal() * t.a);
    t.jhat = 0.5 * b.mf.asDiagonal() * t.qcheck;
    t.jhat.diagonal().setZero();
    t.kappahat = -(b.mf.cwiseProduct(t.qcheck.rowwise().sum()));
    for (Eigen::Index i = 0; i < nf; ++i) {
        if (t.kappahat(i) < 0.0 && t.kappahat(i) > -1e-12 * scale * b.mf(i)) t.kappahat(i) = 0.0;
    }
    return t;
}

[[nodiscard]] inline TraceDecomposition trace_form(const SymmetricChain& chain, const SubsetSpec& subset,
                                                   std::optional<Vector> mu = std::nullopt,
                                                   double route_tol = kRouteTol) {
    const auto b = split_blocks(chain, subset);
    const auto hit = hitting_operator(b);
    return trace_form(b, hit, chain, mu ? *mu : b.mf, route_tol);
}

/// The trace process as a chain on F with measure m|F and generator Qcheck.
[[nodiscard]] inline SymmetricChain trace_chain(const SymmetricChain& chain, const SubsetSpec& subset) {
    const auto t = trace_form(chain, subset);
    Matrix q = t.qcheck;
    // Symmetrize m Qcheck to remove rounding asymmetry before validation.
    const Vector mf = gather(chain.weights(), subset.trace_set());
    Matrix flux = 0.5 * (mf.asDiagonal() * q + (mf.asDiagonal() * q).transpose());
    q = mf.cwiseInverse().asDiagonal() * flux;
    std::vector<std::string> labels;
    for (auto x : subset.trace_set()) labels.push_back(chain.labels()[x]);
    return validate_chain(q, mf, std::move(labels));
}

struct JumpKillCertificate {
    Matrix jhat;          // U/2 + J restricted to F x F, off diagonal
    Vector kappahat;      // V + kappa restricted to F
    double jump_residual;
    double kill_residual;
};

/// Jumping and killing measures of the trace process assembled from Feller
/// data, certified against the Schur-complement decomposition.
[[nodiscard]] inline JumpKillCertificate trace_jump_kill(const SymmetricChain& chain, const SubsetSpec& subset,
                                                         double tol = kIdentityTol) {
    const auto b = split_blocks(chain, subset);
    const auto hit = hitting_operator(b);
    const auto feller = feller_measures(b, hit);
    const auto bd = beurling_deny(chain);
    const auto t = trace_form(b, hit, chain, b.mf);

    JumpKillCertificate c;
    c.jhat = 0.5 * feller.u + gather(bd.j, subset.trace_set(), subset.trace_set());
    c.jhat.diagonal().setZero();
    c.kappahat = feller.v + gather(bd.kappa, subset.trace_set());
    const double unit = energy_unit(chain);
    c.jump_residual = max_abs(c.jhat - t.jhat) / std::max({max_abs(c.jhat), max_abs(t.jhat), unit});
    c.kill_residual = max_abs(c.kappahat - t.kappahat) / std::max({max_abs(c.kappahat), max_abs(t.kappahat), unit});
    if (c.jump_residual > tol || c.kill_residual > tol) {
        throw IdentityViolation("trace jump/kill certificate failed: jump residual " + std::to_string(c.jump_residual) +
                                ", kill residual " + std::to_string(c.kill_residual));
    }
    return c;
}

struct IdentityReport {
    double excursion_balance;  // jump/kill balance of the harmonic extension across E0
    double trace_decomposition;
    double feller_symmetry;
    double alpha_convergence;
    // raw sides, for reporting
    double balance_lhs, balance_rhs;
    double trace_lhs, trace_rhs;

    [[nodiscard]] double worst() const {
        return std::max({excursion_balance, trace_decomposition, feller_symmetry, alpha_convergence});
    }
};

/// alpha grid 2^0 .. 2^60 used for the monotone-convergence check.
[[nodiscard]] inline std::vector<double> dyadic_alphas(int max_power = 60) {
    std::vector<double> a;
    for (int k = 0; k <= max_power; ++k) a.push_back(std::ldexp(1.0, k));
    return a;
}

/// Residuals of the exact identities relating U, V, J, kappa and the trace form
/// for one boundary vector u.
[[nodiscard]] inline IdentityReport verify_identities(const SymmetricChain& chain, const SubsetSpec& subset,
                                                      const Vector& u) {
    const auto b = split_blocks(chain, subset);
    const auto hit = hitting_operator(b, dyadic_alphas());
    const auto feller = feller_measures(b, hit);
    const auto bd = beurling_deny(chain);
    const Vector hu = harmonic_extension(b, hit, u);
    const auto mu_hu = energy_measure(chain, hu);
    const auto& f = subset.trace_set();
    const auto& e0 = subset.complement();
    const auto nf = static_cast<Eigen::Index>(f.size());

    IdentityReport r{};

    double boundary_jumps = 0.0;
    for (Eigen::Index a = 0; a < nf; ++a)
        for (Eigen::Index c = 0; c < nf; ++c) {
            if (a == c) continue;
            const double d = u(a) - u(c);
            boundary_jumps += d * d * feller.u(a, c);
        }
    const double boundary_kill = (u.array().square() * feller.v.array()).sum();

    // mu<Hu>(E0) + 2 sum_{E0 x F} (Hu(x) - u(a))^2 J + sum_{E0} (Hu)^2 kappa
    double lhs = 0.0;
    for (auto x : e0) {
        const auto xi = static_cast<Eigen::Index>(x);
        lhs += mu_hu.total()(xi) + hu(xi) * hu(xi) * bd.kappa(xi);
        for (Eigen::Index a = 0; a < nf; ++a) {
            const double d = hu(xi) - u(a);
            lhs += 2.0 * d * d * bd.j(xi, static_cast<Eigen::Index>(f[static_cast<std::size_t>(a)]));
        }
    }
    const double rhs = boundary_jumps + 2.0 * boundary_kill;
    r.balance_lhs = lhs;
    r.balance_rhs = rhs;
    const double floor = energy_unit(chain) * std::max(max_abs(u) * max_abs(u), 1e-300);
    r.excursion_balance = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), floor});

    // E(Hu, Hu) = sum_{F x F} (u(a) - u(c))^2 (U/2 + J) + sum_F u^2 (V + kappa)
    const double energy = dirichlet_form(chain, hu, hu);
    double decomposition = 0.5 * boundary_jumps + boundary_kill;
    for (Eigen::Index a = 0; a < nf; ++a) {
        const auto xa = static_cast<Eigen::Index>(f[static_cast<std::size_t>(a)]);
        decomposition += u(a) * u(a) * bd.kappa(xa);
        for (Eigen::Index c = 0; c < nf; ++c) {
            if (a == c) continue;
            const double d = u(a) - u(c);
            decomposition += d * d * bd.j(xa, static_cast<Eigen::Index>(f[static_cast<std::size_t>(c)]));
        }
    }
    r.trace_lhs = energy;
    r.trace_rhs = decomposition;
    r.trace_decomposition = std::abs(energy - decomposition) / std::max({std::abs(energy), std::abs(decomposition), floor});

    r.feller_symmetry = relative_difference(feller.u, Matrix(feller.u.transpose()));

    const double uscale = std::max(max_abs(feller.u), 1e-300);
    double conv = relative_difference(feller.u_alpha.back(), feller.u);
    for (std::size_t k = 1; k < feller.u_alpha.size(); ++k) {
        const double drop = (feller.u_alpha[k - 1] - feller.u_alpha[k]).maxCoeff();
        conv = std::max(conv, std::max(0.0, drop) / uscale);
    }
    r.alpha_convergence = conv;
    return r;
}

struct TimeChangeResult {
    SymmetricChain chain;
    FellerData feller;
};

/// Slows the chain on E0 by the positive density phi: measure phi*m on E0,
/// rates divided by phi on E0 rows. F rows are untouched.
[[nodiscard]] inline TimeChangeResult time_change_chain(const SymmetricChain& chain, const SubsetSpec& subset,
                                                        const Vector& phi) {
    const auto& e0 = subset.complement();
    if (phi.size() != static_cast<Eigen::Index>(e0.size())) throw InvalidInput("phi must live on E0");
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
        if (!(phi(i) > 0.0) || !std::isfinite(phi(i))) {
            throw NonPositiveDensity("phi(" + std::to_string(e0[static_cast<std::size_t>(i)]) + ") must be positive");
        }
    }
    Matrix q = chain.rates();
    Vector m = chain.weights();
    for (std::size_t i = 0; i < e0.size(); ++i) {
        const auto x = static_cast<Eigen::Index>(e0[i]);
        const double p = phi(static_cast<Eigen::Index>(i));
        m(x) *= p;
        q.row(x) /= p;
    }
    auto z = validate_chain(q, m, chain.labels());
    auto feller = feller_measures(z, subset);
    return {std::move(z), std::move(feller)};
}

/// mu(a) = sum_x g(x) m(x) P_x(X at the hitting time of F = a); F states hit themselves.
[[nodiscard]] inline Vector hitting_time_measure(const SymmetricChain& chain, const SubsetSpec& subset,
                                                 std::optional<Vector> g = std::nullopt) {
    const Vector weight = g ? *g : Vector::Ones(static_cast<Eigen::Index>(chain.size()));
    if (weight.size() != static_cast<Eigen::Index>(chain.size())) throw InvalidInput("g must be a full-state vector");
    if (weight.minCoeff() <= 0.0) throw InvalidInput("g must be strictly positive");
    const auto b = split_blocks(chain, subset);
    const auto hit = hitting_operator(b);
    const Vector gm = weight.cwiseProduct(chain.weights());
    return gather(gm, subset.trace_set()) + hit.h.transpose() * gather(gm, subset.complement());
}

} // namespace traceforms::chain
