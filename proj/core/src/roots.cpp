#include "aggscale/roots.hpp"

#include <cmath>
#include <functional>
#include <numbers>

#include "aggscale/errors.hpp"

namespace aggscale {

namespace {

constexpr double kResidualTol = 1e-12;
constexpr double kWidthTol = 1e-12;
constexpr double kMaxUpper = 1048576.0;  // 2^20
constexpr int kMaxIterations = 400;

struct Scalar {
    double value;
    double slope;
};

// Safeguarded Newton on a bracket [lo, hi] with g(lo) > 0 > g(hi). Newton
// iterates are accepted only strictly inside the bracket; otherwise bisect.
// Once a Newton correction is below the width tolerance the bracket is closed
// by probing just either side of the iterate.
RootResult hybrid_solve(const std::function<Scalar(double)>& g, double lo, double hi) {
    RootResult out;
    double x = 0.5 * (lo + hi);
    Scalar gx = g(x);
    for (int it = 1; it <= kMaxIterations; ++it) {
        out.iterations = it;
        if (gx.value > 0.0) {
            lo = x;
        } else if (gx.value < 0.0) {
            hi = x;
        } else {
            lo = hi = x;
        }
        const double width_tol = kWidthTol * std::max(1.0, std::abs(x));
        if (hi - lo <= width_tol && std::abs(gx.value) <= kResidualTol) {
            break;
        }

        double next = 0.5 * (lo + hi);
        if (gx.slope != 0.0 && std::isfinite(gx.slope)) {
            const double newton = x - gx.value / gx.slope;
            if (newton > lo && newton < hi) {
                next = newton;
                if (std::abs(newton - x) < 0.25 * width_tol) {
                    // Converged in value; tighten the bracket around it.
                    const double probe_lo = std::max(lo, newton - 0.25 * width_tol);
                    const double probe_hi = std::min(hi, newton + 0.25 * width_tol);
                    if (g(probe_lo).value > 0.0) lo = probe_lo;
                    if (g(probe_hi).value < 0.0) hi = probe_hi;
                }
            }
        }
        x = next;
        gx = g(x);
    }
    out.value = x;
    out.residual = std::abs(gx.value);
    out.bracket = {lo, hi};
    return out;
}

double expand_upper(const std::function<Scalar(double)>& g, double start) {
    double hi = start;
    while (g(hi).value >= 0.0) {
        hi *= 2.0;
        if (hi > kMaxUpper) {
            throw NoBracket("no sign change of the exponent equation below 2^20");
        }
    }
    return hi;
}

}  // namespace

double nongel_delta_equation(double lambda, double delta) {
    const double a = (lambda - 1.0) * std::numbers::ln2;
    return std::expm1(a * (delta + 1.0)) / std::expm1(a) - 0.5 * (1.0 + delta);
}

double marginal_delta_equation(double psi0, double delta) {
    if (delta == 0.0) {
        return 0.5 / std::numbers::ln2 - psi0;
    }
    return delta / (-2.0 * std::expm1(-delta * std::numbers::ln2)) - psi0;
}

RootResult solve_delta_nongel(double lambda) {
    if (!(lambda < 1.0) || !std::isfinite(lambda)) {
        throw RegimeViolation("solve_delta_nongel requires finite lambda < 1");
    }
    const double a = (lambda - 1.0) * std::numbers::ln2;
    const double denom = std::expm1(a);
    const auto g = [a, denom](double d) {
        const double e = a * (d + 1.0);
        return Scalar{std::expm1(e) / denom - 0.5 * (1.0 + d),
                      a * std::exp(e) / denom - 0.5};
    };
    // g(0) = 1/2 > 0 and the negative root lies below 0.
    const double hi = expand_upper(g, 1.0);
    return hybrid_solve(g, 0.0, hi);
}

RootResult solve_delta_marginal(double psi0) {
    const double limit = 0.5 / std::numbers::ln2;
    if (!std::isfinite(psi0) || psi0 <= limit) {
        throw BelowLimit("psi0 must exceed 1/(2 ln 2) for a positive exponent");
    }
    // h(D) = D/(2(1-2^-D)) - psi0 is increasing; solve -h so that the sign
    // convention matches the non-gelling case.
    const auto g = [psi0](double d) {
        const double ln2 = std::numbers::ln2;
        const double one_minus = -std::expm1(-d * ln2);
        const double f = d / (2.0 * one_minus);
        const double df = (one_minus - d * ln2 * std::exp(-d * ln2)) /
                          (2.0 * one_minus * one_minus);
        return Scalar{psi0 - f, -df};
    };
    const double hi = expand_upper(g, 1.0);
    RootResult r = hybrid_solve(g, 1e-300, hi);
    return r;
}

}  // namespace aggscale
