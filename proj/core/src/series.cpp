#include "aggscale/series.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "aggscale/errors.hpp"
#include "aggscale/roots.hpp"

namespace aggscale {

namespace {

using ext = long double;

constexpr int kMinRadiusTerms = 8;
constexpr double kConsistencyTol = 1e-8;

// Cauchy product sum_{k=1}^{n-1} c_k c_{n-k} over the non-constant coefficients
// (c is 1-based with c[0] unused).
ext inner_square(const std::vector<ext>& c, int n) {
    ext acc = 0.0L;
    for (int k = 1; k < n; ++k) acc += c[k] * c[n - k];
    return acc;
}

ext exp2l_ext(ext e) { return std::exp2(e); }

LocalSeries finish(LocalSeries s, const std::vector<ext>& c) {
    s.coeffs.assign(c.begin() + 1, c.end());
    if (s.order() >= kMinRadiusTerms) {
        s.radius_est = estimate_radius(s);
    }
    return s;
}

}  // namespace

double LocalSeries::value(double s) const {
    if (coeffs.empty()) return psi0;
    const ext t = (step == 1.0) ? ext(s) : (s > 0.0 ? std::exp(ext(step) * std::log(ext(s))) : 0.0L);
    ext acc = 0.0L;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * t + *it;
    return static_cast<double>(psi0 + acc * t);
}

double LocalSeries::derivative(double s) const {
    if (coeffs.empty() || s <= 0.0) {
        return (step == 1.0 && !coeffs.empty()) ? coeffs.front() : 0.0;
    }
    const ext t = (step == 1.0) ? ext(s) : (s > 0.0 ? std::exp(ext(step) * std::log(ext(s))) : 0.0L);
    // d/ds sum c_n t^n = (step/s) sum n c_n t^n
    ext acc = 0.0L;
    const int n = order();
    for (int k = n; k >= 1; --k) acc = acc * t + ext(k) * coeffs[k - 1];
    return static_cast<double>(ext(step) / ext(s) * acc * t);
}

double LocalSeries::handoff(double cap) const {
    const double r = radius_est.value_or(std::numeric_limits<double>::infinity());
    return std::min(0.25 * r, cap);
}

LocalSeries nongel_series(double lambda, double delta, double c1, int n_terms) {
    if (!(lambda < 1.0)) throw RegimeViolation("nongel_series requires lambda < 1");
    if (n_terms < 1) throw InputError("series needs at least one term");
    const ext lam = lambda;
    const ext d = delta;
    const ext one_minus = 1.0L - lam;
    const ext psi0 = nongel_psi0(lambda);

    // Order n of (1-lambda)(y psi)' = psi^2 - r psi(r y)^2 in t = y^Delta:
    //   (1-lambda)(1+n Delta) c_n = S_n (1 - r^(1+n Delta)),  S_n = sum c_k c_{n-k}.
    // Splitting S_n = 2 psi0 c_n + P_n leaves D_n c_n = P_n (1 - r^(1+n Delta)).
    const auto loss = [&](int n) { return -std::expm1((1.0L + n * d) * (lam - 1.0L) * std::numbers::ln2_v<ext>); };
    const auto lead = [&](int n) { return one_minus * (1.0L + n * d) - 2.0L * psi0 * loss(n); };

    const ext mismatch = std::abs(lead(1)) / (one_minus * (1.0L + d));
    if (!(mismatch <= kConsistencyTol)) {
        throw InconsistentDelta("order-1 balance fails; delta does not solve the exponent equation");
    }

    std::vector<ext> c(n_terms + 1, 0.0L);
    c[0] = psi0;
    c[1] = c1;
    for (int n = 2; n <= n_terms; ++n) {
        c[n] = inner_square(c, n) * loss(n) / lead(n);
    }
    LocalSeries s;
    s.regime = Regime::NonGelling;
    s.psi0 = static_cast<double>(psi0);
    s.step = delta;
    return finish(std::move(s), c);
}

namespace {

// psi' = psi^2 - w psi(rho zeta)^2 with psi = sum a_k zeta^k:
//   (k+1) a_{k+1} = S_k (1 - w rho^k).
LocalSeries gel_like_series(ext weight, ext log2_ratio, int n_terms) {
    std::vector<ext> a(n_terms + 1, 0.0L);
    a[0] = 1.0L;
    for (int k = 0; k < n_terms; ++k) {
        ext square = 0.0L;
        for (int i = 0; i <= k; ++i) square += a[i] * a[k - i];
        const ext factor = 1.0L - weight * exp2l_ext(ext(k) * log2_ratio);
        a[k + 1] = square * factor / ext(k + 1);
    }
    LocalSeries s;
    s.regime = Regime::Gelling;
    s.psi0 = 1.0;
    s.step = 1.0;
    return finish(std::move(s), a);
}

}  // namespace

LocalSeries gel_series(double lambda, double tau, int n_terms) {
    return series_for(make_problem(lambda, tau), n_terms);
}

LocalSeries marginal_series(double a1, int n_terms) {
    if (n_terms < 1) throw InputError("series needs at least one term");
    if (!std::isfinite(a1)) throw InputError("a1 must be finite");
    // x psi' = psi^2 - psi(x/2)^2:  k a_k = S_k (1 - 2^-k). Order 1 is an
    // identity, so a1 is free; for k >= 2
    //   a_k (k - 2 (1 - 2^-k)) = P_k (1 - 2^-k).
    std::vector<ext> a(n_terms + 1, 0.0L);
    a[0] = 1.0L;
    a[1] = a1;
    for (int k = 2; k <= n_terms; ++k) {
        const ext loss = 1.0L - exp2l_ext(-ext(k));
        a[k] = inner_square(a, k) * loss / (ext(k) - 2.0L * loss);
    }
    LocalSeries s;
    s.regime = Regime::Marginal;
    s.psi0 = 1.0;
    s.step = 1.0;
    return finish(std::move(s), a);
}

LocalSeries series_for(const ScalingProblem& problem, int n_terms) {
    if (n_terms < 1) throw InputError("series needs at least one term");
    const ScalingConstants& k = problem.constants();
    switch (problem.regime()) {
        case Regime::NonGelling:
            return nongel_series(problem.lambda(), k.delta, -problem.c(), n_terms);
        case Regime::Gelling:
            return gel_like_series(k.weight, std::log2(ext(k.ratio)), n_terms);
        case Regime::Marginal:
            return marginal_series(problem.a1(), n_terms);
    }
    throw InputError("unknown regime");
}

double estimate_radius_from_coeffs(std::span<const double> coeffs) {
    if (coeffs.size() < static_cast<std::size_t>(kMinRadiusTerms)) {
        throw TooFewTerms("radius estimate needs at least 8 terms");
    }
    // Fit log|c_n| = alpha + beta n on the upper half of the nonzero terms.
    std::vector<std::pair<double, double>> pts;
    const std::size_t first = coeffs.size() / 2;
    for (std::size_t i = first; i < coeffs.size(); ++i) {
        if (coeffs[i] != 0.0 && std::isfinite(coeffs[i])) {
            pts.emplace_back(static_cast<double>(i + 1), std::log(std::abs(coeffs[i])));
        }
    }
    if (pts.empty()) {
        const bool all_zero = std::all_of(coeffs.begin(), coeffs.end(), [](double c) { return c == 0.0; });
        if (all_zero) return std::numeric_limits<double>::infinity();
        // Only low-order terms survive: a polynomial.
        return std::numeric_limits<double>::infinity();
    }
    if (pts.size() == 1) {
        const double n = pts.front().first;
        return std::exp(-pts.front().second / n);
    }
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= pts.size();
    my /= pts.size();
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    const double slope = sxy / sxx;
    return std::exp(-slope);
}

double estimate_radius(const LocalSeries& series) {
    const double rt = estimate_radius_from_coeffs(series.coeffs);
    if (!std::isfinite(rt)) return rt;
    return series.step == 1.0 ? rt : std::pow(rt, 1.0 / series.step);
}

}  // namespace aggscale
