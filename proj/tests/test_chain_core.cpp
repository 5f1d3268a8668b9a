#include "fixtures.hpp"

#include <traceforms/chain/core.hpp>

#include <catch2/catch_amalgamated.hpp>

using Catch::Approx;
using namespace traceforms;
using namespace traceforms::chain;

namespace {

constexpr double kTight = 1e-13;

SubsetSpec f12() { return SubsetSpec(3, {1, 2}); }

Matrix mat2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_CASE("validate_chain accepts the fixtures and rejects bad tables", "[chain_core][validate]") {
    const auto c = fixtures::c1();
    CHECK(c.size() == 3);
    CHECK(c.conservative());
    CHECK(c.kill_rates().isZero());
    CHECK(fixtures::c2().kill_rates()(0) == 1.0);

    SECTION("asymmetric rates name the offending pair") {
        Matrix q(2, 2);
        q << -1, 1, 2, -2;
        try {
            (void)validate_chain(q, Vector::Ones(2));
            FAIL("expected SymmetryViolation");
        } catch (const SymmetryViolation& e) {
            CHECK(std::string(e.what()).find("(0,1)") != std::string::npos);
        }
    }
    SECTION("negative off-diagonal rate") {
        Matrix q(2, 2);
        q << 1, -1, -1, 1;
        CHECK_THROWS_AS(validate_chain(q, Vector::Ones(2)), NegativeRate);
    }
    SECTION("positive row sum is a negative kill rate") {
        Matrix q(2, 2);
        q << -1, 1, 1, 0;
        CHECK_THROWS_AS(validate_chain(q, Vector::Ones(2)), NegativeRate);
    }
    SECTION("two disconnected 2-cliques") {
        Matrix j = Matrix::Zero(4, 4);
        j(0, 1) = j(1, 0) = 1.0;
        j(2, 3) = j(3, 2) = 1.0;
        try {
            (void)validate_chain(make_rate_matrix(j, Vector::Zero(4)), Vector::Ones(4));
            FAIL("expected NotIrreducible");
        } catch (const NotIrreducible& e) {
            CHECK(std::string(e.what()).find("{0,1}") != std::string::npos);
            CHECK(std::string(e.what()).find("{2,3}") != std::string::npos);
        }
    }
    SECTION("nonpositive weight") {
        Vector m = Vector::Ones(3);
        m(1) = 0.0;
        CHECK_THROWS_AS(validate_chain(c.rates(), m), InvalidInput);
    }
}

TEST_CASE("split_blocks", "[chain_core][blocks]") {
    const auto b1 = split_blocks(fixtures::c1(), f12());
    REQUIRE(b1.q00.rows() == 1);
    CHECK(b1.q00(0, 0) == -3.0);
    const auto b2 = split_blocks(fixtures::c2(), f12());
    CHECK(b2.q00(0, 0) == -4.0);

    CHECK_THROWS_AS(SubsetSpec(3, {0, 1, 2}), InvalidInput);
    CHECK_THROWS_AS(SubsetSpec(3, {}), InvalidInput);
    CHECK_THROWS_AS(SubsetSpec(3, {5}), InvalidInput);
}

TEST_CASE("hitting_operator", "[chain_core][hitting]") {
    const auto b1 = split_blocks(fixtures::c1(), f12());
    const auto h1 = hitting_operator(b1, {3.0});
    CHECK(h1.h(0, 0) == Approx(1.0 / 3).epsilon(kTight));
    CHECK(h1.h(0, 1) == Approx(2.0 / 3).epsilon(kTight));
    CHECK(std::abs(h1.q(0)) < kTight);
    CHECK(h1.at_alpha(3.0)(0, 0) == Approx(1.0 / 6).epsilon(kTight));
    CHECK(h1.at_alpha(3.0)(0, 1) == Approx(1.0 / 3).epsilon(kTight));
    CHECK_THROWS_AS(h1.at_alpha(7.0), InvalidInput);

    const auto h2 = hitting_operator(split_blocks(fixtures::c2(), f12()));
    CHECK(h2.h(0, 0) == Approx(0.25).epsilon(kTight));
    CHECK(h2.h(0, 1) == Approx(0.5).epsilon(kTight));
    CHECK(h2.q(0) == Approx(0.25).epsilon(kTight));

    CHECK_THROWS_AS(hitting_operator(b1, {-1.0}), InvalidInput);
}

TEST_CASE("energy_functional and zero_order_potential", "[chain_core][energy]") {
    const auto b1 = split_blocks(fixtures::c1(), f12());
    const auto b2 = split_blocks(fixtures::c2(), f12());
    const Vector one = Vector::Ones(1);

    CHECK(energy_functional(b1, one, one) == Approx(3.0).epsilon(kTight));
    const auto h2 = hitting_operator(b2);
    CHECK(energy_functional(b2, one, h2.q) == Approx(1.0).epsilon(kTight));
    CHECK(energy_functional(b1, one, Vector::Zero(1)) == 0.0);

    // Q00 f > 0 for f = -1.
    CHECK_THROWS_AS(energy_functional(b1, -one, one), NotExcessive);

    Vector nu(1);
    nu << 3.0;
    const Vector g1 = zero_order_potential(b1, nu);
    CHECK(g1(0) == Approx(1.0).epsilon(kTight));
    CHECK(energy_functional(b1, one, g1) == Approx(3.0).epsilon(kTight));
    CHECK(zero_order_potential(b1, Vector::Zero(1)).isZero());

    const Vector g2 = zero_order_potential(b2, one);
    CHECK(g2(0) == Approx(0.25).epsilon(kTight));
    CHECK(energy_functional(b2, one, g2) == Approx(1.0).epsilon(kTight));
    CHECK_THROWS_AS(zero_order_potential(b1, -one), InvalidInput);
}

TEST_CASE("feller_measures on the fixtures", "[chain_core][feller]") {
    const auto d1 = feller_measures(fixtures::c1(), f12(), {3.0});
    CHECK(relative_difference(d1.u, mat2(1.0 / 3, 2.0 / 3, 2.0 / 3, 4.0 / 3)) < kTight);
    CHECK(d1.v.cwiseAbs().maxCoeff() < kTight);
    CHECK(d1.u_alpha[0](0, 1) == Approx(1.0 / 3).epsilon(kTight));
    CHECK(d1.provenance == Provenance::exact);

    const auto d2 = feller_measures(fixtures::c2(), f12());
    CHECK(relative_difference(d2.u, mat2(0.25, 0.5, 0.5, 1.0)) < kTight);
    CHECK(relative_difference(d2.v, vec2(0.25, 0.5)) < kTight);

    // Independent oracle: alpha-limit of alpha H_alpha^T M0 H with plain inverses.
    for (const auto& chain : {fixtures::c1(), fixtures::c2()}) {
        const auto b = split_blocks(chain, f12());
        const double alpha = 1e9;
        const Matrix inv = (alpha * Matrix::Identity(1, 1) - b.q00).inverse();
        const Matrix h = (-b.q00).inverse() * b.q0f;
        const Matrix limit = alpha * (inv * b.q0f).transpose() * b.m0.asDiagonal() * h;
        CHECK(relative_difference(limit, feller_measures(chain, f12()).u) < 1e-8);
    }
}

TEST_CASE("alpha-order Feller measure scales as alpha/(alpha+3) on C1", "[chain_core][feller][alpha]") {
    const std::vector<double> alphas{1.0, 3.0, 10.0, 100.0};
    const auto d = feller_measures(fixtures::c1(), f12(), alphas);
    double prev = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const double expected = alphas[i] / (alphas[i] + 3.0) * (2.0 / 3.0);
        CHECK(relative_difference(d.u_alpha[i](0, 1), expected) <= 1e-12);
        CHECK(d.u_alpha[i](0, 1) > prev);
        prev = d.u_alpha[i](0, 1);
    }
}

TEST_CASE("beurling_deny", "[chain_core][bd]") {
    const auto bd1 = beurling_deny(fixtures::c1());
    CHECK(bd1.j(0, 1) == 0.5);
    CHECK(bd1.j(0, 2) == 1.0);
    CHECK(bd1.j(1, 2) == 0.0);
    CHECK(bd1.j.diagonal().isZero());
    CHECK(bd1.kappa.isZero());
    CHECK(bd1.j.isApprox(bd1.j.transpose()));

    const auto bd2 = beurling_deny(fixtures::c2());
    CHECK(bd2.kappa(0) == 1.0);
    CHECK(bd2.kappa(1) == 0.0);
    CHECK(bd2.kappa(2) == 0.0);
}

TEST_CASE("energy_measure", "[chain_core][energy_measure]") {
    const auto c = fixtures::c1();
    Vector f(3);
    f << 1.0 / 3, 1.0, 0.0;
    const auto e = energy_measure(c, f);
    CHECK(e.jump_part(0) == Approx(2.0 / 3).epsilon(kTight));
    CHECK(e.local_part.isZero());

    CHECK(energy_measure(c, Vector::Constant(3, 2.5)).jump_part.isZero());

    const auto e2 = energy_measure(fixtures::c2(), Vector::Ones(3));
    CHECK(e2.kill_part(0) == 1.0);
    CHECK(e2.kill_part(1) == 0.0);
    CHECK(e2.kill_part(2) == 0.0);

    // sum jump + 2 sum kill = 2 E(f, f)
    Vector g(3);
    g << 0.3, -1.2, 2.0;
    const auto chain = fixtures::c2();
    const auto eg = energy_measure(chain, g);
    CHECK(eg.jump_part.sum() + 2.0 * eg.kill_part.sum() == Approx(2.0 * dirichlet_form(chain, g, g)).epsilon(1e-14));
}

TEST_CASE("trace_form on the fixtures", "[chain_core][trace]") {
    const auto t1 = trace_form(fixtures::c1(), f12());
    CHECK(relative_difference(t1.qcheck, mat2(-2.0 / 3, 2.0 / 3, 2.0 / 3, -2.0 / 3)) < kTight);
    CHECK(t1.jhat(0, 1) == Approx(1.0 / 3).epsilon(kTight));
    CHECK(t1.kappahat.cwiseAbs().maxCoeff() < kTight);
    CHECK(t1.route_residual <= kRouteTol);
    const Vector u = vec2(1.7, -0.4);
    CHECK(u.dot(t1.a * u) == Approx(2.0 / 3 * (1.7 + 0.4) * (1.7 + 0.4)).epsilon(1e-13));

    const auto t2 = trace_form(fixtures::c2(), f12());
    CHECK(relative_difference(t2.qcheck, mat2(-0.75, 0.5, 0.5, -1.0)) < kTight);
    CHECK(relative_difference(t2.kappahat, vec2(0.25, 0.5)) < kTight);
    const Vector e1 = vec2(1.0, 0.0);
    CHECK(e1.dot(t2.a * e1) == Approx(0.75).epsilon(kTight));

    SECTION("generator is rescaled by mu") {
        const auto t = trace_form(fixtures::c2(), f12(), vec2(2.0, 0.5));
        CHECK(t.generator(0, 1) == Approx(0.25).epsilon(kTight));
        CHECK(t.generator(1, 0) == Approx(1.0).epsilon(kTight));
        CHECK_THROWS_AS(trace_form(fixtures::c2(), f12(), vec2(1.0, 0.0)), NonPositiveDensity);
    }
    SECTION("single-state F of a conservative chain has zero form") {
        const auto t = trace_form(fixtures::c1(), SubsetSpec(3, {2}));
        CHECK(max_abs(t.a) < kTight);
        CHECK(max_abs(t.kappahat) < kTight);
    }
}

TEST_CASE("trace_jump_kill certificate", "[chain_core][trace]") {
    const auto c1 = trace_jump_kill(fixtures::c1(), f12());
    CHECK(c1.jhat(0, 1) == Approx(1.0 / 3).epsilon(kTight));
    const auto c2 = trace_jump_kill(fixtures::c2(), f12());
    CHECK(relative_difference(c2.kappahat, vec2(0.25, 0.5)) < kTight);

    // C1 plus a direct F-F rate of 5.
    Matrix j = Matrix::Zero(3, 3);
    j(0, 1) = j(1, 0) = 1.0;
    j(0, 2) = j(2, 0) = 2.0;
    j(1, 2) = j(2, 1) = 5.0;
    const auto chain = validate_chain(make_rate_matrix(j, Vector::Zero(3)), Vector::Ones(3));
    const auto c3 = trace_jump_kill(chain, f12());
    CHECK(c3.jhat(0, 1) == Approx(17.0 / 6).epsilon(kTight));
    CHECK(c3.jump_residual <= kIdentityTol);
}

TEST_CASE("verify_identities on the fixtures", "[chain_core][identities]") {
    const auto r1 = verify_identities(fixtures::c1(), f12(), vec2(1.0, 0.0));
    CHECK(r1.balance_lhs == Approx(4.0 / 3).epsilon(1e-13));
    CHECK(r1.balance_rhs == Approx(4.0 / 3).epsilon(1e-13));
    CHECK(r1.worst() <= 1e-10);

    const auto r2 = verify_identities(fixtures::c2(), f12(), vec2(1.0, 0.0));
    CHECK(r2.trace_lhs == Approx(0.75).epsilon(1e-13));
    CHECK(r2.trace_rhs == Approx(0.75).epsilon(1e-13));
    CHECK(r2.worst() <= 1e-10);

    // Constant u: the trace energy reduces to c^2 sum (V + kappa|F).
    const double c = 1.7;
    const auto r3 = verify_identities(fixtures::c2(), f12(), Vector::Constant(2, c));
    CHECK(r3.trace_lhs == Approx(c * c * 0.75).epsilon(1e-13));
}

TEST_CASE("time_change_chain leaves Feller data fixed", "[chain_core][time_change]") {
    const auto base1 = feller_measures(fixtures::c1(), f12());
    const auto z1 = time_change_chain(fixtures::c1(), f12(), Vector::Constant(1, 10.0));
    CHECK(z1.chain.weights()(0) == 10.0);
    CHECK(z1.chain.rates()(0, 1) == Approx(0.1));
    CHECK(relative_difference(z1.feller.u, base1.u) <= 1e-10);

    const auto same = time_change_chain(fixtures::c1(), f12(), Vector::Ones(1));
    CHECK(same.chain.rates() == fixtures::c1().rates());
    CHECK(same.chain.weights() == fixtures::c1().weights());

    const auto base2 = feller_measures(fixtures::c2(), f12());
    const auto z2 = time_change_chain(fixtures::c2(), f12(), Vector::Constant(1, 0.5));
    CHECK(relative_difference(z2.feller.u, base2.u) <= 1e-10);
    CHECK(relative_difference(z2.feller.v, base2.v) <= 1e-10);

    CHECK_THROWS_AS(time_change_chain(fixtures::c1(), f12(), Vector::Zero(1)), NonPositiveDensity);
}

TEST_CASE("hitting_time_measure", "[chain_core][hitting_time]") {
    CHECK(relative_difference(hitting_time_measure(fixtures::c1(), f12()), vec2(4.0 / 3, 5.0 / 3)) < kTight);
    CHECK(relative_difference(hitting_time_measure(fixtures::c2(), f12()), vec2(1.25, 1.5)) < kTight);
    // g concentrated on F (up to a negligible positive floor on E0).
    Vector g(3);
    g << 1e-300, 2.0, 3.0;
    CHECK(relative_difference(hitting_time_measure(fixtures::c1(), f12(), g), vec2(2.0, 3.0)) < kTight);
    CHECK_THROWS_AS(hitting_time_measure(fixtures::c1(), f12(), Vector::Zero(3)), InvalidInput);
}

TEST_CASE("singular killed generator is reported", "[chain_core][errors]") {
    // A state with rates so tiny relative to the rest that -Q00 is numerically singular.
    Matrix j = Matrix::Zero(3, 3);
    j(0, 1) = j(1, 0) = 1e-300;
    j(1, 2) = j(2, 1) = 1.0;
    const auto chain = validate_chain(make_rate_matrix(j, Vector::Zero(3)), Vector::Ones(3));
    CHECK_THROWS_AS(split_blocks(chain, SubsetSpec(3, {2})), SingularKilledGenerator);
}
