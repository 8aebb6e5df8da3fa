#pragma once

// Reference computations written independently of the library: plain
// bisection on the defining equations, coefficient recursions derived from the
// integral forms and carried out in 50-digit (or exact rational) arithmetic,
// and fixed-step RK4 integrators with Hermite history.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace aggscale::testing {

using big = boost::multiprecision::cpp_bin_float_50;
using rational = boost::multiprecision::cpp_rational;

/// Plain bisection; f(a) and f(b) must differ in sign.
template <class F>
double bisect(F f, double a, double b, int iterations = 200) {
    double fa = f(a);
    if (fa * f(b) > 0.0) throw std::invalid_argument("bisect: no sign change");
    for (int i = 0; i < iterations; ++i) {
        const double m = 0.5 * (a + b);
        if (m == a || m == b) break;
        const double fm = f(m);
        if ((fm < 0.0) == (fa < 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

/// Composite Simpson rule on `panels` (even) panels.
template <class F>
double simpson(F f, double a, double b, int panels) {
    if (panels % 2) ++panels;
    const double h = (b - a) / panels;
    double sum = f(a) + f(b);
    for (int i = 1; i < panels; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

/// (1+D)/2 - (1 - 2^((lambda-1)(D+1)))/(1 - 2^(lambda-1)), straight from the
/// definition with std::pow.
inline double nongel_exponent_gap(double lambda, double d) {
    const long double a = std::pow(2.0L, static_cast<long double>(lambda) - 1.0L);
    const long double f = (1.0L - std::pow(a, static_cast<long double>(d) + 1.0L)) / (1.0L - a);
    return static_cast<double>((1.0L + d) / 2.0L - f);
}

inline double marginal_exponent_gap(double psi0, double d) {
    return d / (2.0 * (1.0 - std::pow(2.0, -d))) - psi0;
}

/// c_1..c_N for psi = psi0 + sum c_n y^(n Delta), matching powers in the
/// integral form (1-lambda) y psi(y) = int_{r y}^{y} psi^2.
inline std::vector<double> nongel_coeffs_oracle(double lambda, double delta, double c1, int n) {
    const big lam = lambda, d = delta;
    const big r = boost::multiprecision::pow(big(2), lam - 1);
    const big psi0 = (1 - lam) / (1 - r);
    std::vector<big> c(n + 1);
    c[0] = psi0;
    c[1] = c1;
    for (int k = 2; k <= n; ++k) {
        big cross = 0;
        for (int i = 1; i < k; ++i) cross += c[i] * c[k - i];
        const big p = k * d + 1;
        const big g = (1 - boost::multiprecision::pow(r, p)) / p;  // int_{r}^{1} u^(k d) du
        // (1-lambda) c_k = g (2 psi0 c_k + cross)
        c[k] = g * cross / ((1 - lam) - 2 * psi0 * g);
    }
    std::vector<double> out;
    for (int k = 1; k <= n; ++k) out.push_back(static_cast<double>(c[k]));
    return out;
}

/// a_1..a_N for psi = 1 + sum a_k zeta^k solving psi' = psi^2 - w psi(r zeta)^2,
/// from psi(zeta) = 1 + int_0^zeta psi^2 - (w/r) int_0^{r zeta} psi^2.
inline std::vector<double> gel_coeffs_oracle(double lambda, double tau, int n) {
    const big lam = lambda, t = tau;
    const big r = boost::multiprecision::pow(big(2), t - lam - 1);
    const big w = boost::multiprecision::pow(big(2), 2 * t - lam - 3);
    std::vector<big> a(n + 1);
    a[0] = 1;
    for (int k = 1; k <= n; ++k) {
        big sq = 0;
        for (int i = 0; i < k; ++i) sq += a[i] * a[k - 1 - i];
        a[k] = sq * (1 - w / r * boost::multiprecision::pow(r, k)) / k;
    }
    std::vector<double> out;
    for (int k = 1; k <= n; ++k) out.push_back(static_cast<double>(a[k]));
    return out;
}

/// Exact a_1..a_N for the lambda = 1 series psi = 1 + sum a_k x^k, from
/// psi(x) = 1 - ln 2 + int_{x/2}^{x} psi(u)^2 du/u (x^k: a_k = S_k (1 - 2^-k)/k).
inline std::vector<rational> marginal_coeffs_exact(const rational& a1, int n) {
    std::vector<rational> a(n + 1);
    a[0] = 1;
    a[1] = a1;
    for (int k = 2; k <= n; ++k) {
        rational cross = 0;
        for (int i = 1; i < k; ++i) cross += a[i] * a[k - i];
        const rational g = (rational(1) - rational(1, boost::multiprecision::cpp_int(1) << k)) / k;
        a[k] = g * cross / (1 - 2 * g);
    }
    return {a.begin() + 1, a.end()};
}

/// Fixed-step RK4 for psi' = psi^2 - w psi(r s)^2, psi(0) = 1, 0 < r <= 1.
/// History between grid points is the cubic Hermite interpolant; where a
/// delayed argument falls inside the current step the step is iterated to a
/// fixed point.
class FixedStepGel {
public:
    FixedStepGel(double ratio, double weight, double h) : r_(ratio), w_(weight), h_(h) {
        psi_.push_back(1.0);
        dpsi_.push_back(rhs(1.0, 1.0));
    }

    /// Marches to `end`; returns the first zero of psi if it crosses.
    std::optional<double> run(double end) {
        while (static_cast<double>(psi_.size() - 1) * h_ < end) {
            const std::size_t n = psi_.size() - 1;
            const double s = static_cast<double>(n) * h_;
            // predictor for the open step: linear extrapolation
            double y1 = psi_[n] + h_ * dpsi_[n];
            double f1 = dpsi_[n];
            for (int it = 0; it < 4; ++it) {
                const auto hist = [&](double p) { return history(p, y1, f1); };
                const double y0 = psi_[n];
                const double k1 = rhs(y0, hist(r_ * s));
                const double k2 = rhs(y0 + 0.5 * h_ * k1, hist(r_ * (s + 0.5 * h_)));
                const double k3 = rhs(y0 + 0.5 * h_ * k2, hist(r_ * (s + 0.5 * h_)));
                const double k4 = rhs(y0 + h_ * k3, hist(r_ * (s + h_)));
                y1 = y0 + h_ / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                f1 = rhs(y1, hist(r_ * (s + h_)));
            }
            psi_.push_back(y1);
            dpsi_.push_back(f1);
            if (y1 <= 0.0) {
                // zero of the last cell's Hermite interpolant by bisection
                return bisect([&](double p) { return value(p); }, s, s + h_);
            }
        }
        return std::nullopt;
    }

    [[nodiscard]] double value(double p) const { return history(p, psi_.back(), dpsi_.back()); }

private:
    [[nodiscard]] double rhs(double y, double yd) const { return y * y - w_ * yd * yd; }

    [[nodiscard]] double history(double p, double y_open, double f_open) const {
        const std::size_t last = psi_.size() - 1;
        std::size_t i = static_cast<std::size_t>(p / h_);
        double y0, y1, f0, f1;
        if (i >= last) {
            i = last;
            y0 = psi_[last];
            f0 = dpsi_[last];
            y1 = y_open;
            f1 = f_open;
        } else {
            y0 = psi_[i];
            f0 = dpsi_[i];
            y1 = psi_[i + 1];
            f1 = dpsi_[i + 1];
        }
        const double t = (p - static_cast<double>(i) * h_) / h_;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
        return h00 * y0 + h10 * h_ * f0 + h01 * y1 + h11 * h_ * f1;
    }

    double r_, w_, h_;
    std::vector<double> psi_, dpsi_;
};

/// Fixed-step RK4 for the dyadic diagonal-kernel chain with monodisperse
/// initial data; returns c_0..c_jmax followed by the leaked mass.
inline std::vector<double> kinetics_rk4(double lambda, int j_max, double t_end, int steps,
                                        double c0 = 1.0) {
    const std::size_t nb = static_cast<std::size_t>(j_max) + 1;
    std::vector<double> rate(nb);
    for (std::size_t j = 0; j < nb; ++j) rate[j] = std::pow(2.0, lambda * static_cast<double>(j));
    const auto f = [&](const std::vector<double>& y) {
        std::vector<double> d(nb + 1, 0.0);
        for (std::size_t j = 0; j < nb; ++j) {
            const double loss = rate[j] * y[j] * y[j];
            d[j] -= loss;
            if (j + 1 < nb) d[j + 1] += 0.5 * loss;
            else d[nb] += std::pow(2.0, static_cast<double>(j)) * loss;
        }
        return d;
    };
    std::vector<double> y(nb + 1, 0.0);
    y[0] = c0;
    const double h = t_end / steps;
    for (int s = 0; s < steps; ++s) {
        const auto k1 = f(y);
        std::vector<double> t(nb + 1);
        for (std::size_t i = 0; i <= nb; ++i) t[i] = y[i] + 0.5 * h * k1[i];
        const auto k2 = f(t);
        for (std::size_t i = 0; i <= nb; ++i) t[i] = y[i] + 0.5 * h * k2[i];
        const auto k3 = f(t);
        for (std::size_t i = 0; i <= nb; ++i) t[i] = y[i] + h * k3[i];
        const auto k4 = f(t);
        for (std::size_t i = 0; i <= nb; ++i) {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    return y;
}

}  // namespace aggscale::testing
