#include "aggscale/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "aggscale/dopri5.hpp"
#include "aggscale/errors.hpp"

namespace aggscale {

namespace {

constexpr double kKiloGrowth = 1e3;
// Absolute error floor per bin, as a fraction of the initial mass.
constexpr double kMassFloor = 1e-3;

struct Moments {
    double m0, m1, m2;
};

Moments moments_of(std::span<const double> c) {
    long double m0 = 0.0L, m1 = 0.0L, m2 = 0.0L;
    long double m = 1.0L;
    for (double cj : c) {
        m0 += cj;
        m1 += m * cj;
        m2 += m * m * cj;
        m *= 2.0L;
    }
    return {static_cast<double>(m0), static_cast<double>(m1), static_cast<double>(m2)};
}

KineticsState make_state(double t, std::span<const double> y) {
    KineticsState st;
    st.t = t;
    st.c.assign(y.begin(), y.end() - 1);
    st.leaked = y.back();
    const Moments m = moments_of(st.c);
    st.m0 = m.m0;
    st.m1 = m.m1;
    st.m2 = m.m2;
    return st;
}

// Time as an unevaluated sum hi + lo. Near gelation the front moves on time
// scales ~2^-j_max, far below the resolution of a double at t ~ 1.
struct CompensatedTime {
    double hi = 0.0;
    double lo = 0.0;

    void add(double h) {
        const double y = h - lo;
        const double t = hi + y;
        lo = (t - hi) - y;
        hi = t;
    }
    [[nodiscard]] double until(double target) const { return (target - hi) + lo; }
};

}  // namespace

KineticsSeries simulate(double lambda, int j_max, double t_end, const KineticsOptions& opt) {
    if (j_max < 40) throw InputError("j_max must be at least 40");
    if (!(opt.c0 > 0.0)) throw InputError("initial concentration must be positive");
    if (!(opt.tol > 0.0 && opt.tol < 1.0)) throw InputError("tol must lie in (0, 1)");
    if (!(t_end > 0.0) || !(opt.t_first > 0.0) || !(opt.snapshot_ratio > 1.0)) {
        throw InputError("times must be positive and the snapshot ratio above 1");
    }

    const auto nb = static_cast<std::size_t>(j_max) + 1;
    std::vector<double> rate(nb), mass(nb);
    for (std::size_t j = 0; j < nb; ++j) {
        mass[j] = std::ldexp(1.0, static_cast<int>(j));
        rate[j] = std::exp2(static_cast<double>(j) * lambda);
    }

    // State: c_0..c_jmax, then leaked mass.
    const auto rhs = [&](double, std::span<const double> y, std::vector<double>& dy) {
        double gain = 0.0;
        for (std::size_t j = 0; j < nb; ++j) {
            const double loss = rate[j] * y[j] * y[j];
            dy[j] = gain - loss;
            gain = 0.5 * loss;
        }
        // The top bin's reactions would populate j_max + 1: that mass leaves.
        dy[nb] = mass[nb - 1] * rate[nb - 1] * y[nb - 1] * y[nb - 1];
    };

    std::vector<double> y(nb + 1, 0.0);
    y[0] = opt.c0;
    const double mass0 = opt.c0;
    std::vector<double> floor(nb + 1);
    for (std::size_t j = 0; j < nb; ++j) floor[j] = kMassFloor * mass0 / mass[j];
    floor[nb] = kMassFloor * mass0;

    KineticsSeries out;
    out.lambda = lambda;
    out.j_max = j_max;
    out.tol = opt.tol;
    out.snapshots.push_back(make_state(0.0, y));
    const double m2_start = out.snapshots.front().m2;

    dopri5::VectorStepper stepper(nb + 1);
    std::vector<double> k1(nb + 1);
    CompensatedTime t;
    rhs(0.0, y, k1);
    double h = 1e-3 * std::min(opt.t_first, 1.0 / (rate[0] * opt.c0));
    double t_snap = opt.t_first;
    double m2_prev = m2_start;

    while (t.until(t_end) > 0.0) {
        if (++out.steps > opt.max_steps) {
            throw NumericalError("kinetics exceeded the step budget");
        }
        const double target = std::min(t_snap, t_end);
        const double remaining = t.until(target);
        const bool lands = h >= remaining * (1.0 - 1e-14);
        const double step = lands ? remaining : h;
        stepper.step(rhs, t.hi, y, k1, step);
        const auto y1 = stepper.y1();
        const auto err = stepper.err();
        double norm = 0.0;
        for (std::size_t i = 0; i <= nb; ++i) {
            const double sc = opt.tol * (std::max(std::abs(y[i]), std::abs(y1[i])) + floor[i]);
            norm = std::max(norm, std::abs(err[i]) / sc);
        }
        if (!std::isfinite(norm)) {
            h = 0.2 * step;
            if (!(h > 0.0)) throw NumericalError("kinetics step size underflow");
            continue;
        }
        const double fac = 0.9 * std::pow(std::max(norm, 1e-10), -1.0 / dopri5::kOrder);
        if (norm > 1.0) {
            h = step * std::max(0.2, fac);
            if (!(h > std::numeric_limits<double>::min())) {
                throw NumericalError("kinetics step size underflow");
            }
            continue;
        }
        const double t_old = t.hi;
        if (lands) {
            t = CompensatedTime{target, 0.0};
        } else {
            t.add(step);
        }
        std::copy(y1.begin(), y1.end(), y.begin());
        const auto k7 = stepper.k7();
        std::copy(k7.begin(), k7.end(), k1.begin());
        for (std::size_t j = 0; j < nb; ++j) {
            if (y[j] < -opt.tol) {
                throw NegativeConcentration("c_" + std::to_string(j) + " went negative at t = " +
                                            std::to_string(t.hi));
            }
        }

        const Moments m = moments_of(std::span<const double>(y).first(nb));
        if (!out.m2_kilo_time && m.m2 >= kKiloGrowth * m2_start) {
            // log-linear interpolation between the two accepted points
            const double a = std::log(m2_prev), b = std::log(m.m2);
            const double goal = std::log(kKiloGrowth * m2_start);
            const double frac = b > a ? (goal - a) / (b - a) : 1.0;
            out.m2_kilo_time = t_old + frac * step;
        }
        m2_prev = m.m2;
        // A step clipped to land on a snapshot must not shrink the next one.
        h = lands ? std::max(h, step * std::min(5.0, fac)) : step * std::min(5.0, fac);

        if (lands) {
            out.snapshots.push_back(make_state(t.hi, y));
            t_snap *= opt.snapshot_ratio;
        }
        if (opt.stop_leak_fraction && y[nb] > *opt.stop_leak_fraction * mass0) {
            if (!lands) out.snapshots.push_back(make_state(t.hi, y));
            out.stopped_early = true;
            break;
        }
    }
    return out;
}

std::size_t pre_truncation_end(const KineticsSeries& series) {
    if (series.snapshots.empty()) return 0;
    const double mass0 = series.snapshots.front().m1;
    std::size_t i = 0;
    while (i < series.snapshots.size() && series.snapshots[i].leaked <= kPreTruncationLeak * mass0) ++i;
    return i;
}

double growth_exponent(const KineticsSeries& series) {
    const std::size_t end = pre_truncation_end(series);
    if (end < 3) throw InputError("too few pre-truncation snapshots");
    const double t_last = series.snapshots[end - 1].t;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 1; i < end; ++i) {
        const auto& s = series.snapshots[i];
        if (s.t >= 0.1 * t_last * (1.0 - 1e-12)) pts.emplace_back(std::log(s.t), std::log(s.mean_size()));
    }
    if (pts.size() < 3 || series.snapshots[1].t > 0.1 * t_last) {
        throw InputError("pre-truncation era spans less than a decade of time");
    }
    double mx = 0.0, my = 0.0;
    for (const auto& [a, b] : pts) {
        mx += a;
        my += b;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [a, b] : pts) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    return sxy / sxx;
}

double mass_defect(const KineticsSeries& series) {
    if (series.snapshots.empty()) return 0.0;
    const double mass0 = series.snapshots.front().m1;
    double worst = 0.0;
    for (const auto& s : series.snapshots) {
        worst = std::max(worst, std::abs(s.m1 + s.leaked - mass0) / mass0);
    }
    return worst;
}

CollapseSnapshot rescale(const KineticsState& st) {
    CollapseSnapshot cs;
    cs.t = st.t;
    cs.s = st.mean_size();
    for (std::size_t j = 0; j < st.c.size(); ++j) {
        cs.x.push_back(std::ldexp(1.0, static_cast<int>(j)) / cs.s);
        cs.y.push_back(cs.s * st.c[j] / (st.m1 * std::numbers::ln2));
    }
    return cs;
}

double snapshot_distance(const CollapseSnapshot& a, const CollapseSnapshot& b, double x_lo,
                         double x_hi) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
        const double x = a.x[i];
        if (x < x_lo || x > x_hi || x < b.x.front() || x > b.x.back()) continue;
        const auto it = std::upper_bound(b.x.begin(), b.x.end(), x);
        if (it == b.x.begin() || it == b.x.end()) continue;
        const std::size_t k = static_cast<std::size_t>(it - b.x.begin());
        const double w = (std::log(x) - std::log(b.x[k - 1])) / (std::log(b.x[k]) - std::log(b.x[k - 1]));
        const double yb = (1.0 - w) * b.y[k - 1] + w * b.y[k];
        worst = std::max(worst, std::abs(a.y[i] - yb));
    }
    return worst;
}

namespace {

// x Phi(x) from the marched psi: x^(-lambda) psi(y(x)); zero past the march.
double x_phi(const SampledSolution& sol, double x) {
    const ScalingProblem& p = sol.problem();
    const double s = p.map().to_var(x);
    if (s > sol.covered_end()) return 0.0;
    return std::exp(-p.lambda() * std::log(x)) * sol.psi(s);
}

// For a given scale b, the amplitude minimising the squared misfit and the
// resulting L-infinity distance.
std::pair<double, double> fit_at_scale(const CollapseSnapshot& cs, const SampledSolution& sol,
                                       double b, double x_lo, double x_hi) {
    double num = 0.0, den = 0.0;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < cs.x.size(); ++i) {
        if (cs.x[i] < x_lo || cs.x[i] > x_hi) continue;
        const double f = x_phi(sol, b * cs.x[i]);
        pts.emplace_back(cs.y[i], f);
        num += cs.y[i] * f;
        den += f * f;
    }
    const double amp = den > 0.0 ? num / den : 0.0;
    double worst = 0.0;
    for (const auto& [y, f] : pts) worst = std::max(worst, std::abs(y - amp * f));
    return {amp, worst};
}

}  // namespace

CollapseReport collapse(const KineticsSeries& series, const SampledSolution& scaling,
                        std::pair<double, double> t_window, double x_lo, double x_hi) {
    if (!(series.lambda < 1.0)) throw RegimeViolation("collapse applies to lambda < 1");
    if (scaling.regime() != Regime::NonGelling ||
        std::abs(scaling.problem().lambda() - series.lambda) > 1e-12) {
        throw InputError("scaling solution must be the non-gelling solution for the same lambda");
    }
    if (!(t_window.first > 0.0) || !(t_window.second > t_window.first)) {
        throw InputError("time window must be positive and increasing");
    }
    if (!(x_lo > 0.0) || !(x_hi > x_lo)) throw InputError("x range must be positive and increasing");
    const std::size_t end = pre_truncation_end(series);
    if (end == 0 || t_window.second > series.snapshots[end - 1].t * (1.0 + 1e-12)) {
        throw OutOfDomain("time window reaches past the pre-truncation era");
    }

    CollapseReport rep;
    rep.x_lo = x_lo;
    rep.x_hi = x_hi;
    for (std::size_t i = 1; i < end; ++i) {
        const auto& st = series.snapshots[i];
        if (st.t < t_window.first * (1.0 - 1e-12) || st.t > t_window.second * (1.0 + 1e-12)) continue;
        rep.snapshots.push_back(rescale(st));
    }
    if (rep.snapshots.size() < 2 || rep.snapshots.back().s / rep.snapshots.front().s < 1e3) {
        throw WindowTooEarly("mean size grows less than three decades inside the window");
    }

    for (auto& cs : rep.snapshots) {
        const auto objective = [&](double log_b) {
            return fit_at_scale(cs, scaling, std::exp(log_b), x_lo, x_hi).second;
        };
        const auto [log_b, dist] =
            boost::math::tools::brent_find_minima(objective, std::log(0.1), std::log(10.0), 40);
        cs.scale = std::exp(log_b);
        const auto [amp, d] = fit_at_scale(cs, scaling, cs.scale, x_lo, x_hi);
        cs.amplitude = amp;
        cs.fit_distance = d;
        (void)dist;
    }
    for (std::size_t i = 0; i + 1 < rep.snapshots.size(); ++i) {
        rep.self_distance.push_back(
            snapshot_distance(rep.snapshots[i + 1], rep.snapshots[i], x_lo, x_hi));
    }
    return rep;
}

void write_snapshot_csv(std::ostream& out, const KineticsSeries& series) {
    out << "t,j,m,c\n" << std::setprecision(17);
    for (const auto& s : series.snapshots) {
        for (std::size_t j = 0; j < s.c.size(); ++j) {
            out << s.t << ',' << j << ',' << std::ldexp(1.0, static_cast<int>(j)) << ',' << s.c[j]
                << '\n';
        }
    }
}

void write_moments_csv(std::ostream& out, const KineticsSeries& series) {
    out << "t,M0,M1,M2,leaked\n" << std::setprecision(17);
    for (const auto& s : series.snapshots) {
        out << s.t << ',' << s.m0 << ',' << s.m1 << ',' << s.m2 << ',' << s.leaked << '\n';
    }
}

}  // namespace aggscale
