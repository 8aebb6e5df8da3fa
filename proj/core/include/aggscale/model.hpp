#pragma once

#include <string_view>

namespace aggscale {

/// Which branch of the diagonal-kernel scaling theory a problem belongs to.
enum class Regime { NonGelling, Marginal, Gelling };

[[nodiscard]] std::string_view to_string(Regime regime) noexcept;

/// Numbers fixed by the regime and its parameters. Fields that do not apply to
/// a regime are NaN.
struct ScalingConstants {
    double psi0 = 0.0;   ///< plateau value of psi at the origin
    double delta = 0.0;  ///< correction exponent (Delta, sigma, or 1)
    double z = 0.0;      ///< growth exponent 1/(1-lambda), non-gelling only
    double sigma = 0.0;  ///< 1 + lambda - tau, gelling only
    double ratio = 0.0;  ///< delayed-argument factor in the marching variable
    double weight = 0.0; ///< prefactor of the delayed square
};

/// Substitution between (x, Phi) and the marching pair (s, psi):
///   non-gelling  psi = x^(1+lambda) Phi,  s = y    = x^(1-lambda)/(1-lambda)
///   gelling      psi = x^tau Phi,         s = zeta = x^sigma/sigma
///   marginal     psi = x^2 Phi,           s = x
/// All powers go through exp/log of the transformed exponent.
class VariableMap {
public:
    VariableMap() = default;
    VariableMap(Regime regime, double lambda, double tau);

    [[nodiscard]] double to_var(double x) const;
    [[nodiscard]] double to_x(double s) const;
    /// Exponent p with psi = x^p Phi.
    [[nodiscard]] double psi_exponent() const noexcept { return psi_exponent_; }
    [[nodiscard]] double phi_from_psi(double x, double psi) const;
    [[nodiscard]] double psi_from_phi(double x, double phi) const;

private:
    Regime regime_ = Regime::NonGelling;
    double var_exponent_ = 1.0;  // s = x^e / e (e = 1 marginal, s = x)
    double psi_exponent_ = 1.0;
};

/// The scalar delay equation satisfied by psi in the marching variable s:
///   non-gelling  (1-lambda) (s psi)' = psi^2 - w psi(r s)^2
///   gelling      psi'                = psi^2 - w psi(r s)^2
///   marginal     s psi'              = psi^2 - psi(s/2)^2
/// with r = ratio and w = weight from ScalingConstants.
struct DelayEquation {
    Regime regime = Regime::NonGelling;
    double lambda = 0.0;
    double ratio = 0.5;
    double weight = 1.0;

    /// psi'(s) given psi(s) and psi(ratio*s).
    [[nodiscard]] double rhs(double s, double psi, double psi_delayed) const noexcept;

    /// Left side minus right side of the equation, in the form written above.
    [[nodiscard]] double residual(double s, double psi, double dpsi,
                                  double psi_delayed) const noexcept;
};

/// One member of a scaling-solution family. Immutable; build with make_problem.
class ScalingProblem {
public:
    [[nodiscard]] Regime regime() const noexcept { return regime_; }
    [[nodiscard]] double lambda() const noexcept { return lambda_; }
    /// Non-gelling c > 0; psi = psi0 - c y^Delta + ...
    [[nodiscard]] double c() const noexcept { return c_; }
    [[nodiscard]] double tau() const noexcept { return tau_; }
    [[nodiscard]] double a1() const noexcept { return a1_; }
    /// The family parameter as passed to make_problem.
    [[nodiscard]] double family_param() const noexcept;
    [[nodiscard]] const ScalingConstants& constants() const noexcept { return constants_; }
    [[nodiscard]] const VariableMap& map() const noexcept { return map_; }
    [[nodiscard]] DelayEquation equation() const noexcept;

private:
    friend ScalingProblem make_problem(double lambda, double family_param);
    friend ScalingProblem make_degenerate_gel_probe(double lambda);

    Regime regime_ = Regime::NonGelling;
    double lambda_ = 0.0;
    double c_ = 0.0;
    double tau_ = 0.0;
    double a1_ = 0.0;
    ScalingConstants constants_{};
    VariableMap map_{};
};

/// Validates lambda and the regime's family parameter (c for lambda < 1, tau
/// for lambda > 1, a1 for lambda == 1). Throws RegimeViolation.
[[nodiscard]] ScalingProblem make_problem(double lambda, double family_param);

/// Gelling problem at tau = lambda + 1, where the delay ratio is 1 and the
/// equation reduces to psi' = (1 - 2^(lambda-1)) psi^2. Only the tau search and
/// tests use this; it is outside the physical window.
[[nodiscard]] ScalingProblem make_degenerate_gel_probe(double lambda);

/// (1-lambda)/(1-2^(lambda-1)), evaluated without cancellation near lambda = 1.
[[nodiscard]] double nongel_psi0(double lambda);

}  // namespace aggscale
