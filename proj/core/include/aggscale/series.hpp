#pragma once

#include <optional>
#include <span>
#include <vector>

#include "aggscale/model.hpp"

namespace aggscale {

/// Truncated expansion psi(s) = psi0 + sum_{n=1..N} coeffs[n-1] * s^(n*step)
/// about s = 0, in the problem's marching variable s (y, zeta or x).
struct LocalSeries {
    Regime regime = Regime::NonGelling;
    double psi0 = 1.0;
    double step = 1.0;
    std::vector<double> coeffs;
    /// Convergence radius in s; absent when there are too few terms to tell.
    std::optional<double> radius_est;

    [[nodiscard]] int order() const noexcept { return static_cast<int>(coeffs.size()); }
    [[nodiscard]] double value(double s) const;
    [[nodiscard]] double derivative(double s) const;
    /// Where the marcher takes over from the series: radius_est/4, capped.
    [[nodiscard]] double handoff(double cap) const;
};

/// Coefficients of psi = psi0 + sum c_n y^(n Delta) for lambda < 1. `delta`
/// must solve the exponent equation: the order-1 balance is checked and a
/// relative mismatch above 1e-8 throws InconsistentDelta.
[[nodiscard]] LocalSeries nongel_series(double lambda, double delta, double c1, int n_terms);

/// Coefficients of psi = 1 + sum a_k zeta^k for lambda > 1 (a1 = 1 - 2^(2tau-lambda-3)).
[[nodiscard]] LocalSeries gel_series(double lambda, double tau, int n_terms);

/// Coefficients of psi = 1 + sum a_k x^k at lambda = 1; a1 is free.
[[nodiscard]] LocalSeries marginal_series(double a1, int n_terms);

/// Dispatches on the problem's regime. Non-gelling uses c1 = -c.
[[nodiscard]] LocalSeries series_for(const ScalingProblem& problem, int n_terms);

/// Ratio-test radius from a log-linear fit of the nonzero tail coefficients.
/// +infinity for an all-zero series; TooFewTerms below 8 terms.
[[nodiscard]] double estimate_radius(const LocalSeries& series);

/// Radius in the expansion variable t = s^step for a bare coefficient list.
[[nodiscard]] double estimate_radius_from_coeffs(std::span<const double> coeffs);

}  // namespace aggscale
