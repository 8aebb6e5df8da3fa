#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "doctest.h"
#include "oracles.hpp"

#include "aggscale/errors.hpp"
#include "aggscale/model.hpp"
#include "aggscale/roots.hpp"
#include "aggscale/series.hpp"

using namespace aggscale;
namespace t = aggscale::testing;

namespace {

/// |residual| of the delay equation for the series truncated to `n` terms.
/// The gelling equation psi' = ... is checked in integrated form
/// psi(s) - 1 - int_0^s (psi^2 - w psi(r u)^2) du, which keeps the order of
/// the first omitted term instead of lowering it by one.
double truncated_residual(const ScalingProblem& p, const LocalSeries& full, int n, double s) {
    LocalSeries cut = full;
    cut.coeffs.resize(static_cast<std::size_t>(n));
    const DelayEquation eq = p.equation();
    if (p.regime() == Regime::Gelling) {
        const auto f = [&](double u) {
            const double a = cut.value(u), b = cut.value(eq.ratio * u);
            return a * a - eq.weight * b * b;
        };
        const double integral = boost::math::quadrature::gauss<double, 30>::integrate(f, 0.0, s);
        return std::abs(cut.value(s) - 1.0 - integral);
    }
    return std::abs(eq.residual(s, cut.value(s), cut.derivative(s), cut.value(eq.ratio * s)));
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= x.size();
    my /= y.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    }
    return sxy / sxx;
}

}  // namespace

TEST_SUITE("series") {

TEST_CASE("one-term non-gelling series passes c1 through") {
    const double delta = solve_delta_nongel(0.0).value;
    const LocalSeries s = nongel_series(0.0, delta, -1.0, 1);
    CHECK(s.psi0 == doctest::Approx(2.0).epsilon(1e-15));
    REQUIRE(s.coeffs.size() == 1);
    CHECK(s.coeffs[0] == -1.0);
    CHECK(s.step == delta);
    CHECK(s.regime == Regime::NonGelling);
}

TEST_CASE("non-gelling coefficients match the integral-form oracle") {
    for (double lambda : {-1.0, 0.0, 0.5, 0.9}) {
        const double delta = solve_delta_nongel(lambda).value;
        const LocalSeries s = nongel_series(lambda, delta, -1.0, 12);
        const auto oracle = t::nongel_coeffs_oracle(lambda, delta, -1.0, 12);
        for (std::size_t n = 0; n < oracle.size(); ++n) {
            CAPTURE(lambda);
            CAPTURE(n);
            CHECK(s.coeffs[n] == doctest::Approx(oracle[n]).epsilon(1e-10));
        }
    }
}

TEST_CASE("an off-root exponent is rejected") {
    const double delta = solve_delta_nongel(0.0).value;
    CHECK_THROWS_AS((void)nongel_series(0.0, delta + 0.1, -1.0, 2), InconsistentDelta);
    CHECK_THROWS_AS((void)nongel_series(1.0, delta, -1.0, 2), RegimeViolation);
}

TEST_CASE("gelling first coefficient is 1 - 2^(2 tau - lambda - 3)") {
    const LocalSeries s = gel_series(2.0, 2.6, 1);
    CHECK(s.coeffs[0] == doctest::Approx(1.0 - std::pow(2.0, 0.2)).epsilon(1e-15));
    CHECK(s.coeffs[0] == doctest::Approx(-0.1487).epsilon(1e-3));
    CHECK(s.step == 1.0);
    CHECK(s.psi0 == 1.0);
}

TEST_CASE("gelling boundary tau = (lambda+3)/2 is rejected upstream") {
    CHECK_THROWS_AS((void)gel_series(2.0, 2.5, 1), RegimeViolation);
}

TEST_CASE("gelling coefficients match the integral-form oracle") {
    const LocalSeries s = gel_series(2.0, 2.6, 20);
    const auto oracle = t::gel_coeffs_oracle(2.0, 2.6, 20);
    for (std::size_t k = 0; k < oracle.size(); ++k) {
        CAPTURE(k);
        CHECK(s.coeffs[k] == doctest::Approx(oracle[k]).epsilon(1e-12));
    }
}

TEST_CASE("gelling series agrees with a fixed-step integration near the origin") {
    const ScalingProblem p = make_problem(2.0, 2.6);
    const LocalSeries s = series_for(p, 20);
    t::FixedStepGel ref(p.constants().ratio, p.constants().weight, 1e-3);
    REQUIRE_FALSE(ref.run(0.5).has_value());
    for (double z : {0.05, 0.1, 0.2, 0.4}) {
        CAPTURE(z);
        CHECK(s.value(z) == doctest::Approx(ref.value(z)).epsilon(1e-11));
    }
}

TEST_CASE("gelling series is a polynomial in zeta") {
    for (double tau : {2.51, 2.6, 2.9}) {
        CHECK(gel_series(2.0, tau, 10).step == 1.0);
    }
}

TEST_CASE("marginal second coefficient is 3/2 a1^2") {
    CHECK(marginal_series(-1.0, 2).coeffs[1] == 1.5);
    CHECK(marginal_series(-0.5, 2).coeffs[1] == 0.375);
    CHECK(marginal_series(-2.0, 2).coeffs[1] == 6.0);
}

TEST_CASE("marginal coefficients match exact rational arithmetic") {
    const LocalSeries s = marginal_series(-1.0, 8);
    const auto exact = t::marginal_coeffs_exact(t::rational(-1), 8);
    for (std::size_t k = 0; k < exact.size(); ++k) {
        const double e = static_cast<double>(exact[k]);
        CAPTURE(k);
        CHECK(s.coeffs[k] == doctest::Approx(e).epsilon(1e-15));
    }
    CHECK(exact[1] == t::rational(3, 2));
}

TEST_CASE("marginal a1 = 0 gives the constant series") {
    const LocalSeries s = marginal_series(0.0, 30);
    for (double c : s.coeffs) CHECK(c == 0.0);
    CHECK(std::isinf(estimate_radius(s)));
}

TEST_CASE("radius estimate") {
    LocalSeries geo;
    geo.regime = Regime::Gelling;
    for (int n = 1; n <= 20; ++n) geo.coeffs.push_back(std::pow(2.0, -n));
    CHECK(estimate_radius(geo) == doctest::Approx(2.0).epsilon(0.05));

    const LocalSeries g = gel_series(2.0, 2.6, 20);
    const double r = estimate_radius(g);
    CHECK(std::isfinite(r));
    CHECK(r > 0.0);

    geo.coeffs.resize(7);
    CHECK_THROWS_AS((void)estimate_radius(geo), TooFewTerms);
}

TEST_CASE("truncation residual scales with the first omitted order") {
    struct Case {
        ScalingProblem problem;
        int terms;
    };
    const std::vector<Case> cases = {
        {make_problem(0.0, 1.0), 1},
        {make_problem(0.5, 1.0), 1},
        {make_problem(2.0, 2.6), 3},
        {make_problem(1.0, -1.0), 3},
    };
    for (const auto& c : cases) {
        const LocalSeries full = series_for(c.problem, 20);
        const double radius = estimate_radius(full);
        const double expected = (c.terms + 1) * full.step;
        std::vector<double> s, res;
        for (double f : {1.0 / 16, 1.0 / 8, 1.0 / 4}) {
            const double at = std::min(radius, 4.0) * f;
            s.push_back(at);
            res.push_back(truncated_residual(c.problem, full, c.terms, at));
        }
        CAPTURE(to_string(c.problem.regime()));
        CAPTURE(c.problem.lambda());
        CHECK(std::abs(log_slope(s, res) - expected) <= 0.5);
    }
}

}  // TEST_SUITE
