// Randomized properties. Each case draws from a fixed seed; CAPTURE prints the
// drawn parameters when a check fails.

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gen.hpp"
#include "oracles.hpp"

#include "aggscale/errors.hpp"
#include "aggscale/kinetics.hpp"
#include "aggscale/model.hpp"
#include "aggscale/pantograph.hpp"
#include "aggscale/roots.hpp"
#include "aggscale/series.hpp"

using namespace aggscale;
namespace t = aggscale::testing;

namespace {

ScalingProblem any_problem(t::Gen& g) {
    switch (g.integer(0, 2)) {
        case 0: return make_problem(g.nongel_lambda(), g.log_uniform(0.1, 10.0));
        case 1: {
            const double lambda = g.uniform(1.05, 4.0);
            return make_problem(lambda, g.gel_tau(lambda));
        }
        default: return make_problem(1.0, -g.log_uniform(0.01, 10.0));
    }
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("exponent root: residual, Delta > 1 and agreement with bisection") {
    t::Gen g(0x5eed0001);
    for (int i = 0; i < 200; ++i) {
        const double lambda = g.nongel_lambda();
        CAPTURE(lambda);
        const RootResult r = solve_delta_nongel(lambda);
        CHECK(r.value > 1.0);
        CHECK(r.residual <= 1e-12);
        const double oracle =
            t::bisect([lambda](double d) { return t::nongel_exponent_gap(lambda, d); }, 1.0, 1e3);
        CHECK(r.value == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("variable map round trip") {
    t::Gen g(0x5eed0002);
    for (int i = 0; i < 300; ++i) {
        const ScalingProblem p = any_problem(g);
        const double x = g.log_uniform(1e-6, 1e6);
        CAPTURE(p.lambda());
        CAPTURE(p.family_param());
        CAPTURE(x);
        const VariableMap& m = p.map();
        CHECK(std::abs(m.to_x(m.to_var(x)) - x) <= 1e-13 * x);
        const double phi = g.log_uniform(1e-3, 1e3);
        const double back = m.phi_from_psi(x, m.psi_from_phi(x, phi));
        CHECK(std::abs(back - phi) <= 1e-13 * phi);
    }
}

TEST_CASE("plateau is a constant solution for any lambda < 1") {
    t::Gen g(0x5eed0003);
    for (int i = 0; i < 200; ++i) {
        const double lambda = g.nongel_lambda();
        const ScalingProblem p = make_problem(lambda, 1.0);
        const double psi0 = p.constants().psi0;
        CAPTURE(lambda);
        CHECK(std::abs(p.equation().residual(g.log_uniform(1e-3, 1e3), psi0, 0.0, psi0)) <=
              1e-14 * std::max(1.0, psi0 * psi0));
        CHECK(p.constants().ratio > 0.0);
        CHECK(p.constants().ratio < 1.0);
    }
}

TEST_CASE("marginal coefficients match exact rationals for rational a1") {
    t::Gen g(0x5eed0004);
    for (int i = 0; i < 40; ++i) {
        const int num = -g.integer(0, 9);
        const int den = g.integer(1, 8);
        const double a1 = static_cast<double>(num) / den;
        CAPTURE(a1);
        const LocalSeries s = marginal_series(a1, 12);
        const auto exact = t::marginal_coeffs_exact(t::rational(num, den), 12);
        for (std::size_t k = 0; k < exact.size(); ++k) {
            const double e = static_cast<double>(exact[k]);
            if (num == 0) {
                CHECK(s.coeffs[k] == 0.0);
            } else {
                CHECK(s.coeffs[k] == doctest::Approx(e).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("gelling coefficients match the oracle across the window") {
    t::Gen g(0x5eed0005);
    for (int i = 0; i < 40; ++i) {
        const double lambda = g.uniform(1.05, 4.0);
        const double tau = g.gel_tau(lambda);
        CAPTURE(lambda);
        CAPTURE(tau);
        const LocalSeries s = gel_series(lambda, tau, 16);
        const auto oracle = t::gel_coeffs_oracle(lambda, tau, 16);
        CHECK(s.coeffs[0] < 0.0);
        for (std::size_t k = 0; k < oracle.size(); ++k) {
            CHECK(s.coeffs[k] == doctest::Approx(oracle[k]).epsilon(1e-11));
        }
    }
}

TEST_CASE("non-gelling solutions are positive, decreasing and obey the decay bound") {
    t::Gen g(0x5eed0006);
    for (int i = 0; i < 8; ++i) {
        const double lambda = g.uniform(-1.0, 0.8);
        const double c = g.log_uniform(0.3, 3.0);
        CAPTURE(lambda);
        CAPTURE(c);
        const ScalingProblem p = make_problem(lambda, c);
        const LocalSeries seed = series_for(p, 20);
        const double end = seed.handoff(1.0) * std::pow(p.constants().ratio, -12.0);
        const SampledSolution sol = march(p, seed, end, 1e-10);
        CHECK(sol.residual_max() <= 1e-10);
        const auto samples = sol.samples();
        for (std::size_t k = 1; k < samples.size(); ++k) {
            CHECK(samples[k].second > 0.0);
            CHECK(samples[k].second <= samples[k - 1].second);
        }
        const DecayBoundReport rep = check_decay_bound(sol);
        CHECK(rep.max_violation <= 1e-10);
    }
}

TEST_CASE("rescaled solutions satisfy the integral form as well as the original") {
    for (double lambda : {0.0, 0.5}) {
        const ScalingProblem p = make_problem(lambda, 1.0);
        const SampledSolution sol = march(p, series_for(p, 20), 20.0, 1e-10);
        const double r = p.constants().ratio;
        const auto defect = [&](double beta, double y) {
            // psi_b(y) = psi(beta y) corresponds to Phi_b(x) = b^(1+lambda) Phi(b x)
            const auto f = [&](double u) { return sol.psi(beta * u) * sol.psi(beta * u); };
            const double rhs = t::simpson(f, r * y, y, 4000);
            const double lhs = (1.0 - lambda) * y * sol.psi(beta * y);
            return std::abs(lhs - rhs) / lhs;
        };
        double base = 0.0;
        for (double y : {0.5, 1.0, 2.0}) base = std::max(base, defect(1.0, y));
        for (double b : {0.5, 2.0}) {
            const double beta = std::pow(b, 1.0 - lambda);
            double worst = 0.0;
            for (double y : {0.5, 1.0, 2.0}) worst = std::max(worst, defect(beta, y));
            CAPTURE(lambda);
            CAPTURE(b);
            CHECK(worst <= 10.0 * base + 1e-13);
        }
    }
}

TEST_CASE("kinetics keeps mass bookkeeping and positivity") {
    t::Gen g(0x5eed0007);
    for (int i = 0; i < 6; ++i) {
        const double lambda = g.uniform(0.0, 0.9);
        const int j_max = g.integer(40, 60);
        KineticsOptions opt;
        opt.tol = g.log_uniform(1e-10, 1e-7);
        CAPTURE(lambda);
        CAPTURE(j_max);
        CAPTURE(opt.tol);
        const KineticsSeries s = simulate(lambda, j_max, 1e6, opt);
        CHECK(mass_defect(s) <= 100.0 * opt.tol);
        for (const auto& st : s.snapshots) {
            CHECK(*std::min_element(st.c.begin(), st.c.end()) >= -opt.tol);
        }
        for (std::size_t k = 1; k < pre_truncation_end(s); ++k) {
            CHECK(s.snapshots[k].mean_size() >= s.snapshots[k - 1].mean_size());
        }
    }
}

}  // TEST_SUITE
