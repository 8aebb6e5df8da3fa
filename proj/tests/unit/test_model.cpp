#include <cmath>

#include "doctest.h"

#include "aggscale/errors.hpp"
#include "aggscale/model.hpp"
#include "aggscale/pantograph.hpp"
#include "aggscale/series.hpp"

using namespace aggscale;

TEST_SUITE("model") {

TEST_CASE("non-gelling problem at lambda 0 has plateau 2") {
    const ScalingProblem p = make_problem(0.0, 1.0);
    CHECK(p.regime() == Regime::NonGelling);
    CHECK(p.constants().psi0 == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(p.constants().z == doctest::Approx(1.0));
    CHECK(p.constants().ratio == doctest::Approx(0.5));
    CHECK(p.constants().delta > 1.0);
    CHECK(std::isnan(p.constants().sigma));
}

TEST_CASE("gelling problem carries sigma = 1 + lambda - tau") {
    const ScalingProblem p = make_problem(2.0, 2.6);
    CHECK(p.regime() == Regime::Gelling);
    CHECK(p.constants().sigma == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(p.constants().ratio == doctest::Approx(std::pow(2.0, -0.4)));
    CHECK(p.constants().weight == doctest::Approx(std::pow(2.0, 0.2)));
}

TEST_CASE("tau window is open at both ends") {
    CHECK_THROWS_AS((void)make_problem(2.0, 2.4), RegimeViolation);
    CHECK_THROWS_AS((void)make_problem(2.0, 2.5), RegimeViolation);
    CHECK_THROWS_AS((void)make_problem(2.0, 3.0), RegimeViolation);
    CHECK_NOTHROW((void)make_problem(2.0, 2.5001));
    CHECK_NOTHROW((void)make_problem(2.0, 2.9999));
}

TEST_CASE("family parameters are validated per regime") {
    CHECK_THROWS_AS((void)make_problem(0.0, 0.0), RegimeViolation);
    CHECK_THROWS_AS((void)make_problem(0.5, -1.0), RegimeViolation);
    CHECK_THROWS_AS((void)make_problem(1.0, 0.5), RegimeViolation);
    CHECK_NOTHROW((void)make_problem(1.0, 0.0));
    CHECK_THROWS_AS((void)make_problem(NAN, 1.0), RegimeViolation);
    CHECK_THROWS_AS((void)make_problem(0.0, INFINITY), RegimeViolation);
}

TEST_CASE("marginal problem uses ratio 1/2 and psi = x^2 Phi") {
    const ScalingProblem p = make_problem(1.0, -1.0);
    CHECK(p.regime() == Regime::Marginal);
    CHECK(p.constants().ratio == 0.5);
    CHECK(p.map().to_var(3.7) == 3.7);
    CHECK(p.map().psi_exponent() == 2.0);
}

TEST_CASE("constant plateau maps back to Phi = psi0 x^-(1+lambda)") {
    const ScalingProblem p = make_problem(0.0, 1.0);
    for (double x : {1e-3, 0.5, 2.0, 40.0}) {
        CHECK(p.map().phi_from_psi(x, p.constants().psi0) == doctest::Approx(2.0 / x).epsilon(1e-14));
    }
    const ScalingProblem m = make_problem(1.0, 0.0);
    for (double x : {1e-3, 0.5, 2.0, 40.0}) {
        CHECK(m.map().phi_from_psi(x, 1.0) == doctest::Approx(1.0 / (x * x)).epsilon(1e-14));
    }
}

TEST_CASE("degenerate probe sits at ratio 1 and is not user constructible") {
    const ScalingProblem p = make_degenerate_gel_probe(2.0);
    CHECK(p.constants().ratio == 1.0);
    CHECK(p.constants().weight == doctest::Approx(2.0));
    CHECK_THROWS_AS((void)make_problem(2.0, 3.0), RegimeViolation);
    CHECK_THROWS_AS((void)make_degenerate_gel_probe(1.0), RegimeViolation);
}

TEST_CASE("phi_from_psi on a sampled solution") {
    const ScalingProblem m = make_problem(1.0, 0.0);
    const SampledSolution sol = march(m, series_for(m, 20), 10.0, 1e-10);
    CHECK(phi_from_psi(m, sol, 2.0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_THROWS_AS((void)phi_from_psi(m, sol, 20.0), OutOfDomain);

    const ScalingProblem g = make_problem(2.0, 2.6);
    const SampledSolution gs = march(g, series_for(g, 20), 50.0, 1e-10);
    const double x = 3.0;
    const double zeta = g.map().to_var(x);
    CHECK(phi_from_psi(g, gs, x) == doctest::Approx(std::pow(x, -2.6) * gs.psi(zeta)).epsilon(1e-13));
}

TEST_CASE("psi0 makes the constant a solution of the delay equation") {
    for (double lambda : {-2.0, -0.5, 0.0, 0.5, 0.9, 0.999}) {
        const ScalingProblem p = make_problem(lambda, 1.0);
        const double psi0 = p.constants().psi0;
        CAPTURE(lambda);
        CHECK(psi0 > 0.0);
        CHECK(std::abs(p.equation().residual(1.3, psi0, 0.0, psi0)) <= 1e-14 * psi0 * psi0);
    }
    CHECK(nongel_psi0(1.0 - 1e-12) == doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-9));
}

}  // TEST_SUITE
