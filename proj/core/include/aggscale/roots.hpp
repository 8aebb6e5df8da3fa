#pragma once

#include <utility>

namespace aggscale {

struct RootResult {
    double value = 0.0;
    double residual = 0.0;  ///< |g(value)| for the defining equation g = 0
    std::pair<double, double> bracket{};
    int iterations = 0;
};

/// F(Delta) - (1+Delta)/2 with F(Delta) = (1 - 2^((lambda-1)(Delta+1)))/(1 - 2^(lambda-1)).
/// Written with expm1 so that it stays accurate as lambda -> 1.
[[nodiscard]] double nongel_delta_equation(double lambda, double delta);

/// Delta/(2(1 - 2^-Delta)) - psi0.
[[nodiscard]] double marginal_delta_equation(double psi0, double delta);

/// Unique positive root of the non-gelling correction-exponent equation.
/// Requires lambda < 1 (RegimeViolation otherwise); throws NoBracket if no
/// sign change is found up to Delta = 2^20.
[[nodiscard]] RootResult solve_delta_nongel(double lambda);

/// Unique positive root of Delta/(2(1 - 2^-Delta)) = psi0. Throws BelowLimit
/// when psi0 <= 1/(2 ln 2), where no positive root exists.
[[nodiscard]] RootResult solve_delta_marginal(double psi0);

}  // namespace aggscale
