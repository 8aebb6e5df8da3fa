#include "aggscale/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "aggscale/errors.hpp"
#include "aggscale/roots.hpp"

namespace aggscale {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double pow2(double e) { return std::exp2(e); }

}  // namespace

std::string_view to_string(Regime regime) noexcept {
    switch (regime) {
        case Regime::NonGelling: return "nongel";
        case Regime::Marginal: return "marginal";
        case Regime::Gelling: return "gel";
    }
    return "unknown";
}

double nongel_psi0(double lambda) {
    // (1-lambda)/(1-2^(lambda-1)) = (1-lambda)/(-expm1((lambda-1) ln 2))
    return (1.0 - lambda) / -std::expm1((lambda - 1.0) * std::numbers::ln2);
}

VariableMap::VariableMap(Regime regime, double lambda, double tau) : regime_(regime) {
    switch (regime) {
        case Regime::NonGelling:
            var_exponent_ = 1.0 - lambda;
            psi_exponent_ = 1.0 + lambda;
            break;
        case Regime::Gelling:
            var_exponent_ = 1.0 + lambda - tau;
            psi_exponent_ = tau;
            break;
        case Regime::Marginal:
            var_exponent_ = 1.0;
            psi_exponent_ = 2.0;
            break;
    }
}

double VariableMap::to_var(double x) const {
    if (regime_ == Regime::Marginal) return x;
    return std::exp(var_exponent_ * std::log(x)) / var_exponent_;
}

double VariableMap::to_x(double s) const {
    if (regime_ == Regime::Marginal) return s;
    return std::exp(std::log(var_exponent_ * s) / var_exponent_);
}

double VariableMap::phi_from_psi(double x, double psi) const {
    return psi * std::exp(-psi_exponent_ * std::log(x));
}

double VariableMap::psi_from_phi(double x, double phi) const {
    return phi * std::exp(psi_exponent_ * std::log(x));
}

double DelayEquation::rhs(double s, double psi, double psi_delayed) const noexcept {
    const double source = psi * psi - weight * psi_delayed * psi_delayed;
    switch (regime) {
        case Regime::NonGelling:
            return (source / (1.0 - lambda) - psi) / s;
        case Regime::Gelling:
            return source;
        case Regime::Marginal:
            return source / s;
    }
    return 0.0;
}

double DelayEquation::residual(double s, double psi, double dpsi,
                               double psi_delayed) const noexcept {
    const double source = psi * psi - weight * psi_delayed * psi_delayed;
    switch (regime) {
        case Regime::NonGelling:
            return (1.0 - lambda) * (psi + s * dpsi) - source;
        case Regime::Gelling:
            return dpsi - source;
        case Regime::Marginal:
            return s * dpsi - source;
    }
    return 0.0;
}

double ScalingProblem::family_param() const noexcept {
    switch (regime_) {
        case Regime::NonGelling: return c_;
        case Regime::Gelling: return tau_;
        case Regime::Marginal: return a1_;
    }
    return kNaN;
}

DelayEquation ScalingProblem::equation() const noexcept {
    return DelayEquation{regime_, lambda_, constants_.ratio, constants_.weight};
}

ScalingProblem make_problem(double lambda, double family_param) {
    if (!std::isfinite(lambda) || !std::isfinite(family_param)) {
        throw RegimeViolation("lambda and the family parameter must be finite");
    }
    ScalingProblem p;
    p.lambda_ = lambda;
    p.c_ = p.tau_ = p.a1_ = kNaN;
    ScalingConstants& k = p.constants_;
    k.z = k.sigma = kNaN;
    if (lambda < 1.0) {
        if (!(family_param > 0.0)) {
            throw RegimeViolation("non-gelling family parameter c must be positive");
        }
        p.regime_ = Regime::NonGelling;
        p.c_ = family_param;
        k.psi0 = nongel_psi0(lambda);
        k.delta = solve_delta_nongel(lambda).value;
        k.z = 1.0 / (1.0 - lambda);
        k.ratio = pow2(lambda - 1.0);
        k.weight = k.ratio;
    } else if (lambda > 1.0) {
        const double tau = family_param;
        const double lower = 0.5 * (lambda + 3.0);
        const double upper = lambda + 1.0;
        if (!(tau > lower && tau < upper)) {
            throw RegimeViolation("gelling tau must lie in ((lambda+3)/2, lambda+1)");
        }
        p.regime_ = Regime::Gelling;
        p.tau_ = tau;
        k.psi0 = 1.0;
        k.sigma = 1.0 + lambda - tau;
        k.delta = k.sigma;
        k.ratio = pow2(tau - lambda - 1.0);
        k.weight = pow2(2.0 * tau - lambda - 3.0);
    } else {
        // a1 = 0 is the constant boundary solution psi = 1; positive a1 gives a
        // growing solution and is rejected.
        if (family_param > 0.0) {
            throw RegimeViolation("marginal a1 must not be positive");
        }
        p.regime_ = Regime::Marginal;
        p.a1_ = family_param;
        k.psi0 = 1.0;
        k.delta = 1.0;
        k.ratio = 0.5;
        k.weight = 1.0;
    }
    p.map_ = VariableMap(p.regime_, lambda, p.tau_);
    return p;
}

ScalingProblem make_degenerate_gel_probe(double lambda) {
    if (!(lambda > 1.0) || !std::isfinite(lambda)) {
        throw RegimeViolation("degenerate probe needs lambda > 1");
    }
    ScalingProblem p;
    p.regime_ = Regime::Gelling;
    p.lambda_ = lambda;
    p.tau_ = lambda + 1.0;
    p.c_ = p.a1_ = kNaN;
    ScalingConstants& k = p.constants_;
    k.psi0 = 1.0;
    k.z = kNaN;
    k.sigma = 0.0;
    k.delta = 0.0;
    k.ratio = 1.0;
    k.weight = pow2(lambda - 1.0);
    // The x <-> zeta map is singular at sigma = 0; keep the marginal identity
    // so that the probe is only ever used in the zeta variable.
    p.map_ = VariableMap(Regime::Marginal, lambda, p.tau_);
    return p;
}

}  // namespace aggscale
