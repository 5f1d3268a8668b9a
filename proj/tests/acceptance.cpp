// Acceptance run: one PASS/FAIL line per criterion. Tolerances and sample
// sizes are fixed here. The eps-shell criterion is a stretch goal and reports
// INCONCLUSIVE instead of FAIL when it misses.

#include "fixtures.hpp"

#include <traceforms/bm/estimators.hpp>
#include <traceforms/chain/core.hpp>
#include <traceforms/chain/lattice.hpp>
#include <traceforms/mc/estimators.hpp>
#include <traceforms/sphere/energy.hpp>
#include <traceforms/sphere/harmonics.hpp>
#include <traceforms/sphere/prototype.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

using namespace traceforms;
using namespace traceforms::chain;

namespace {

constexpr double kPi = std::numbers::pi;

enum class Verdict { pass, fail, inconclusive };

struct Outcome {
    Verdict verdict = Verdict::fail;
    std::string detail;
};

struct Criterion {
    int id;
    const char* title;
    double budget_s;
    bool stretch;
    std::function<Outcome()> run;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

std::string sci(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

SubsetSpec f12() { return SubsetSpec(3, {1, 2}); }

double rel(const Matrix& a, const Matrix& b) { return max_abs(a - b) / std::max(max_abs(b), 1e-300); }

// ---------------------------------------------------------------- chain exact

Outcome chain_exact_suite() {
    Matrix u1(2, 2), u2(2, 2);
    u1 << 1.0 / 3, 2.0 / 3, 2.0 / 3, 4.0 / 3;
    u2 << 0.25, 0.5, 0.5, 1.0;
    Vector v1 = Vector::Zero(2), v2(2);
    v2 << 0.25, 0.5;
    const auto fc1 = feller_measures(fixtures::c1(), f12());
    const auto fc2 = feller_measures(fixtures::c2(), f12());
    const double fixture_err = std::max({rel(fc1.u, u1), max_abs(fc1.v - v1), rel(fc2.u, u2), rel(fc2.v, v2)});

    double identity = 0.0, decomposition = 0.0, routes = 0.0;
    auto check = [&](const SymmetricChain& c, const SubsetSpec& s, const Vector& u) {
        identity = std::max(identity, verify_identities(c, s, u).worst());
        const auto jk = trace_jump_kill(c, s, std::numeric_limits<double>::infinity());
        decomposition = std::max({decomposition, jk.jump_residual, jk.kill_residual});
        routes = std::max(routes, trace_form(c, s, std::nullopt, std::numeric_limits<double>::infinity()).route_residual);
    };
    Vector u(2);
    u << 0.7, -1.3;
    check(fixtures::c1(), f12(), u);
    check(fixtures::c2(), f12(), u);
    std::mt19937_64 gen(20240601);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const auto inst = fixtures::random_instance(gen, 40);
        const SubsetSpec s(inst.chain.size(), inst.f);
        Vector r(static_cast<Eigen::Index>(inst.f.size()));
        for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = unif(gen);
        check(inst.chain, s, r);
    }
    const bool ok = fixture_err <= 1e-10 && identity <= 1e-10 && decomposition <= 1e-10 && routes <= 1e-12;
    return verdict(ok, "fixtures " + sci(fixture_err) + ", identities " + sci(identity) + ", jump/kill " +
                           sci(decomposition) + " (tol 1e-10); routes " + sci(routes) + " (tol 1e-12)");
}

Outcome alpha_convergence() {
    const std::vector<double> alphas{1.0, 3.0, 10.0, 100.0};
    const auto f = feller_measures(fixtures::c1(), f12(), alphas);
    double err = 0.0;
    bool monotone = true;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        const double exact = alphas[k] / (alphas[k] + 3.0) * (2.0 / 3.0);
        err = std::max(err, std::abs(f.u_alpha[k](0, 1) - exact));
        if (k > 0 && !(f.u_alpha[k](0, 1) > f.u_alpha[k - 1](0, 1))) monotone = false;
    }
    return verdict(err <= 1e-12 && monotone,
                   "max |U_a(1,2) - a/(a+3) 2/3| = " + sci(err) + " (tol 1e-12), monotone " + (monotone ? "yes" : "no"));
}

Outcome time_change_invariance() {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> w(0.1, 10.0);
    double worst = 0.0;
    auto run = [&](const SymmetricChain& c, const SubsetSpec& s) {
        const auto base = feller_measures(c, s);
        const double unit = energy_unit(c);
        for (int k = 0; k < 10; ++k) {
            Vector phi(static_cast<Eigen::Index>(s.complement().size()));
            for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = w(gen);
            const auto tc = time_change_chain(c, s, phi);
            worst = std::max(worst, max_abs(tc.feller.u - base.u) / std::max(max_abs(base.u), unit));
            worst = std::max(worst, max_abs(tc.feller.v - base.v) / std::max(max_abs(base.v), unit));
        }
    };
    run(fixtures::c1(), f12());
    run(fixtures::c2(), f12());
    for (int k = 0; k < 20; ++k) {
        const auto inst = fixtures::random_instance(gen, 40);
        run(inst.chain, SubsetSpec(inst.chain.size(), inst.f));
    }
    return verdict(worst <= 1e-10, "22 chains x 10 reweightings, max relative change " + sci(worst) + " (tol 1e-10)");
}

// ----------------------------------------------------------------- chain MC

Outcome excursion_mc() {
    Matrix psi = Matrix::Ones(2, 2);
    psi.diagonal().setZero();
    auto r = mc::estimate_feller_mc(fixtures::c1(), f12(), psi, 40000.0, 64, {4, 0}).report;
    r.with_exact(4.0 / 3.0);
    const double err = std::abs(r.estimate / (4.0 / 3.0) - 1.0);
    return verdict(err <= 0.01 && r.n_events >= 200000,
                   "estimate " + sci(r.estimate) + " +- " + sci(r.std_error) + " vs 4/3, rel err " + sci(err) +
                       " (tol 0.01), events " + std::to_string(r.n_events) + " (min 200000)");
}

Outcome supplementary_mc() {
    Vector d1(2);
    d1 << 1.0, 0.0;
    const auto s = mc::estimate_supplementary_mc(fixtures::c2(), f12(), d1, {0.1, 0.2, 0.3, 0.4}, 1000000, {5, 0});
    const double err = std::abs(s.report.estimate / 0.25 - 1.0);
    return verdict(err <= 0.05, "V(1) = " + sci(s.report.estimate) + " +- " + sci(s.report.std_error) +
                                    " vs 1/4, rel err " + sci(err) + " (tol 0.05)");
}

Outcome levy_system() {
    Matrix g = Matrix::Zero(3, 4);
    g(0, 2) = 1.0;
    g(0, 1) = 1.0;
    const auto jumps = mc::levy_jump_check(fixtures::c1(), 0, g, 0.5, 100000, {6, 0});
    Matrix death = Matrix::Zero(3, 4);
    death(0, 3) = 1.0;
    const auto deaths = mc::levy_jump_check(fixtures::c2(), 0, death, 0.5, 100000, {6, 1});
    const double z1 = *jumps.z_score, z2 = *deaths.z_score;
    return verdict(std::abs(z1) < 4.0 && std::abs(z2) < 4.0,
                   "jump counts z = " + sci(z1) + ", killing counts z = " + sci(z2) + " (|z| < 4)");
}

Outcome killing_curve() {
    std::vector<double> grid;
    for (int k = 0; k <= 4; ++k) grid.push_back(0.1 * std::ldexp(1.0, -k));
    const auto c2 = fixtures::c2();
    const auto curve = mc::killing_limit_curve(c2, c2.weights(), grid, 400000, {7, 0});
    bool nonincreasing = true;
    std::string values;
    for (std::size_t j = 0; j < curve.size(); ++j) {
        values += (j ? ", " : "") + sci(curve[j].value);
        if (j > 0 && curve[j].value > curve[j - 1].value + 2.0 * std::hypot(curve[j].std_error, curve[j - 1].std_error)) {
            nonincreasing = false;
        }
    }
    const bool decay = curve.back().value < curve.front().value / 4.0;
    return verdict(nonincreasing && decay, "values [" + values + "], nonincreasing within 2 se: " +
                                               (nonincreasing ? "yes" : "no") + ", last < first/4: " + (decay ? "yes" : "no"));
}

// ------------------------------------------------------------------ sphere

Outcome sphere_identity() {
    const sphere::SphereSpec s(3, 1.0);
    const double two_pi = 2.0 * kPi;
    const auto one = sphere::BoundaryFunction::from_coefficients(0, Vector::Constant(1, std::sqrt(4.0 * kPi)));
    const double lhs1 = sphere::dirichlet_energy(s, one);
    const double rhs1 = sphere::supplementary_density(s) * s.area();
    const double err1 = std::max(std::abs(lhs1 - two_pi), std::abs(rhs1 - two_pi)) / two_pi;

    Vector c(4);
    c.setZero();
    c(sphere::harmonic_index(1, 1)) = std::sqrt(4.0 * kPi / 3.0);
    const auto xi1 = sphere::verify_douglas_identity(s, sphere::BoundaryFunction::from_coefficients(1, c), 35, 3);
    const auto& p = xi1.douglas.parts;
    const double split = std::max(std::abs(p.jump - 4.0 * kPi / 3.0), std::abs(p.kill - 2.0 * kPi / 3.0)) / two_pi;
    const double xi1_sides = std::max(std::abs(xi1.lhs - two_pi), std::abs(xi1.rhs - two_pi)) / two_pi;

    double worst = 0.0;
    for (int l = 2; l <= 3; ++l) {
        for (int m = -l; m <= l; ++m) {
            worst = std::max(worst, sphere::verify_douglas_identity(s, sphere::BoundaryFunction::harmonic(l, m), 35, 3).residual);
        }
    }
    const bool ok = err1 <= 1e-10 && xi1.residual <= 1e-3 && xi1_sides <= 1e-3 && split <= 1e-3 && worst <= 1e-3;
    return verdict(ok, "phi=1 " + sci(err1) + " (tol 1e-10); phi=xi1 residual " + sci(xi1.residual) + ", split " +
                           sci(p.jump) + " + " + sci(p.kill) + " (err " + sci(split) + "); degree 2-3 worst " +
                           sci(worst) + " (tol 1e-3)");
}

Outcome escape_probability() {
    const sphere::SphereSpec s(3, 1.0);
    bm::ShellConfig cfg;
    cfg.kill_radius = 100.0;
    Vector x = Vector::Zero(3);
    x(0) = 2.0;
    const auto e = bm::escape_probability_mc(s, x, cfg, 100000, {9, 0});
    const double p_r = bm::annulus_hit_probability(s, 2.0, 100.0);
    const double q = 1.0 - (p_r + (1.0 - p_r) * (1.0 / 100.0));
    const bool ok = std::abs(p_r - 0.494949494949495) < 1e-12 && std::abs(*e.hit.z_score) < 4.0 &&
                    std::abs(q - 0.5) < 1e-12 && std::abs(*e.escape.z_score) < 4.0;
    return verdict(ok, "hit " + sci(e.hit.estimate) + " +- " + sci(e.hit.std_error) + " vs 0.494949 (z " +
                           sci(*e.hit.z_score) + "); corrected q formula " + sci(q) + ", MC " + sci(e.escape.estimate) +
                           " (z " + sci(*e.escape.z_score) + ")");
}

Outcome hitting_law() {
    const sphere::SphereSpec s(3, 1.0);
    bm::ShellConfig cfg;
    Vector x = Vector::Zero(3);
    x(0) = 2.0;
    constexpr int kBins = 20;
    std::vector<double> counts(kBins, 0.0);
    Rng rng({10, 0});
    int hits = 0;
    while (hits < 100000) {
        const auto h = bm::sample_hit_unbounded(s, x, cfg, rng);
        if (h.escaped) continue;
        ++hits;
        const double th = std::acos(std::clamp(h.point(0), -1.0, 1.0));
        counts[static_cast<std::size_t>(std::min(kBins - 1, static_cast<int>(th / kPi * kBins)))] += 1.0;
    }
    // reference: Gauss-Legendre in cos(theta) of the exterior Poisson kernel, normalized by 1 - q
    const auto gl = sphere::gauss_legendre(40);
    double chi2 = 0.0;
    for (int b = 0; b < kBins; ++b) {
        const double a = std::cos(kPi * (b + 1) / kBins), c = std::cos(kPi * b / kBins);
        double acc = 0.0;
        for (std::size_t k = 0; k < gl.x.size(); ++k) {
            const double t = 0.5 * (c - a) * gl.x[k] + 0.5 * (c + a);
            Vector xi(3);
            xi << t, std::sqrt(1.0 - t * t), 0.0;
            acc += gl.w[k] * sphere::poisson_kernel(s, sphere::Side::exterior, x, xi);
        }
        const double p = 2.0 * kPi * 0.5 * (c - a) * acc / 0.5;
        const double expect = hits * p;
        chi2 += (counts[static_cast<std::size_t>(b)] - expect) * (counts[static_cast<std::size_t>(b)] - expect) / expect;
    }
    const double crit = boost::math::quantile(boost::math::chi_squared(kBins - 1), 0.95);
    return verdict(chi2 < crit, "chi2 = " + sci(chi2) + " over 20 bins, 95% critical " + sci(crit));
}

Outcome shell_kernel() {
    const sphere::SphereSpec s(3, 1.0);
    bm::ShellConfig cfg;
    const auto est = bm::estimate_feller_sphere_mc(s, bm::default_bins(), {0.1, 0.05, 0.025}, 8'000'000, cfg, {11, 0});
    double worst = 0.0;
    std::string bins;
    for (const auto& b : est.bins) {
        if (!b.estimated || b.bin.lo_deg < 30.0) continue;
        const double e = std::abs(b.extrapolated.estimate / *b.extrapolated.exact_reference - 1.0);
        worst = std::max(worst, e);
        bins += (bins.empty() ? "" : ", ") + sci(e);
    }
    const double v_err = std::abs(est.v_hat.estimate / 0.5 - 1.0);
    return verdict(worst <= 0.10 && v_err <= 0.10, "bin rel errors [" + bins + "] (tol 0.10); v_hat " +
                                                       sci(est.v_hat.estimate) + ", rel err " + sci(v_err) + " (tol 0.10)");
}

// --------------------------------------------------------------- prototype

Outcome prototype_lattice() {
    Vector lower(3), x0 = Vector::Zero(3);
    lower << -1.5, -3.0, -3.0;
    x0(0) = 3.0;
    const double h = 0.75;
    const auto lat = lattice_chain_from_kernel({3, 9, h, lower}, {KernelKind::mixed, 1.0, 2.0}, prototype_region(h, x0));
    const double a_err = std::abs(lat.stable_const - 1.0 / (kPi * kPi));
    const auto& f = lat.subset.trace_set();
    const auto nf = static_cast<Eigen::Index>(f.size());
    Vector u(nf), ball(nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
        const auto& p = lat.positions[f[static_cast<std::size_t>(i)]];
        u(i) = p(0) * p(1) + 0.3 * p(2);
        ball(i) = p.norm() <= 1.0 + 1e-12 ? 1.0 : 0.0;
    }
    const double identity = verify_identities(lat.chain, lat.subset, u).worst();
    const auto jk = trace_jump_kill(lat.chain, lat.subset, std::numeric_limits<double>::infinity());
    const auto tf = trace_form(lat.chain, lat.subset, std::nullopt, std::numeric_limits<double>::infinity());
    const auto feller = feller_measures(lat.chain, lat.subset);
    const double energy = sphere::prototype_trace_energy(lat, ball, &feller).total();
    const double exact = ball.dot(tf.a * ball);
    const double e_err = std::abs(energy - exact) / std::abs(exact);
    const double worst = std::max({identity, jk.jump_residual, jk.kill_residual, tf.route_residual});
    const bool ok = lat.chain.size() == 729 && a_err <= 1e-15 && worst <= 1e-10 && e_err <= 1e-10;
    return verdict(ok, std::to_string(lat.chain.size()) + " sites, |F| = " + std::to_string(nf) + ", A(3,-1) err " +
                           sci(a_err) + ", identities " + sci(worst) + ", energy vs trace form " + sci(e_err) +
                           " (tol 1e-10)");
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "chain exact suite", 10, false, chain_exact_suite},
        {2, "alpha-order Feller convergence", 5, false, alpha_convergence},
        {3, "time-change invariance", 5, false, time_change_invariance},
        {4, "excursion pair rate on C1", 60, false, excursion_mc},
        {5, "supplementary measure on C2", 120, false, supplementary_mc},
        {6, "Levy system counts", 60, false, levy_system},
        {7, "killing-time curve", 60, false, killing_curve},
        {8, "sphere energy identity", 30, false, sphere_identity},
        {9, "escape probability", 60, false, escape_probability},
        {10, "exterior hitting law", 60, false, hitting_law},
        {11, "eps-shell Feller kernel", 600, true, shell_kernel},
        {12, "prototype lattice", 60, false, prototype_lattice},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const InsufficientEvents& e) {
            o = {Verdict::inconclusive, std::string("insufficient events: ") + e.what()};
        } catch (const std::exception& e) {
            o = {Verdict::fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.verdict == Verdict::pass && secs > c.budget_s) {
            o = {Verdict::fail, o.detail + "; over time budget"};
        }
        if (c.stretch && o.verdict == Verdict::fail) o.verdict = Verdict::inconclusive;
        const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "INCONCLUSIVE";
        std::printf("%s [%d] %s: %s (%.1f s, budget %.0f s)\n", tag, c.id, c.title, o.detail.c_str(), secs, c.budget_s);
        std::fflush(stdout);
        if (o.verdict == Verdict::fail) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
