#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace aggscale::dopri5 {

// Dormand-Prince 5(4) tableau with the Hairer-Wanner continuous extension.
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

inline constexpr int kOrder = 5;

/// Fourth-order continuous extension of one accepted scalar step.
struct DenseSegment {
    double s0 = 0.0;
    double h = 0.0;
    std::array<double, 5> r{};

    [[nodiscard]] double end() const noexcept { return s0 + h; }

    [[nodiscard]] double value(double s) const noexcept {
        const double th = (s - s0) / h;
        const double th1 = 1.0 - th;
        return r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])));
    }

    [[nodiscard]] double derivative(double s) const noexcept {
        const double th = (s - s0) / h;
        const double th1 = 1.0 - th;
        // d/dth of r0 + th r1 + th th1 r2 + th^2 th1 r3 + th^2 th1^2 r4
        const double d = r[1] + (1.0 - 2.0 * th) * r[2] + th * (2.0 - 3.0 * th) * r[3] +
                         2.0 * th * th1 * (1.0 - 2.0 * th) * r[4];
        return d / h;
    }
};

/// Result of one scalar trial step from (s, y) with first stage k1.
struct ScalarStep {
    double y1 = 0.0;
    double k7 = 0.0;  ///< f(s+h, y1), reused as k1 of the next step
    double err = 0.0; ///< embedded error estimate (absolute)
    DenseSegment dense{};
};

/// One Dormand-Prince trial step for y' = f(s, y).
template <class F>
ScalarStep step_scalar(F&& f, double s, double y, double k1, double h) {
    const double k2 = f(s + c2 * h, y + h * (a21 * k1));
    const double k3 = f(s + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const double k4 = f(s + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const double k5 = f(s + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const double k6 = f(s + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const double y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const double k7 = f(s + h, y1);

    ScalarStep out;
    out.y1 = y1;
    out.k7 = k7;
    out.err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double ydiff = y1 - y;
    const double bspl = h * k1 - ydiff;
    out.dense.s0 = s;
    out.dense.h = h;
    out.dense.r = {y, ydiff, bspl, ydiff - h * k7 - bspl,
                   h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7)};
    return out;
}

/// Vector form used by the kinetics integrator. `f(t, y, dydt)` fills dydt.
class VectorStepper {
public:
    explicit VectorStepper(std::size_t n)
        : k1_(n), k2_(n), k3_(n), k4_(n), k5_(n), k6_(n), k7_(n), tmp_(n), y1_(n), err_(n) {}

    /// Trial step; afterwards y1(), err() and k7() hold the results. k1 must be
    /// f(t, y) on entry.
    template <class F>
    void step(F&& f, double t, std::span<const double> y, std::span<const double> k1, double h) {
        const std::size_t n = y.size();
        std::copy(k1.begin(), k1.end(), k1_.begin());
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * a21 * k1_[i];
        f(t + c2 * h, tmp_, k2_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
        f(t + c3 * h, tmp_, k3_);
        for (std::size_t i = 0; i < n; ++i)
            tmp_[i] = y[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
        f(t + c4 * h, tmp_, k4_);
        for (std::size_t i = 0; i < n; ++i)
            tmp_[i] = y[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
        f(t + c5 * h, tmp_, k5_);
        for (std::size_t i = 0; i < n; ++i)
            tmp_[i] = y[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] +
                                  a65 * k5_[i]);
        f(t + h, tmp_, k6_);
        for (std::size_t i = 0; i < n; ++i)
            y1_[i] = y[i] + h * (a71 * k1_[i] + a73 * k3_[i] + a74 * k4_[i] + a75 * k5_[i] +
                                 a76 * k6_[i]);
        f(t + h, y1_, k7_);
        for (std::size_t i = 0; i < n; ++i)
            err_[i] = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] +
                           e7 * k7_[i]);
    }

    [[nodiscard]] std::span<const double> y1() const noexcept { return y1_; }
    [[nodiscard]] std::span<const double> err() const noexcept { return err_; }
    [[nodiscard]] std::span<const double> k7() const noexcept { return k7_; }

private:
    std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y1_, err_;
};

}  // namespace aggscale::dopri5
