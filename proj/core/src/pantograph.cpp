#include "aggscale/pantograph.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "aggscale/errors.hpp"

namespace aggscale {

namespace {

constexpr double kMinTol = 1e-12;
constexpr double kMaxTol = 1e-4;
constexpr double kBlowupFactor = 100.0;
constexpr double kCrossingTol = 1e-12;
constexpr double kValueFloor = 1e-300;
// The 4th-order dense output is looser than the step itself; controlling
// the step this much tighter keeps the interpolant within the requested tol.
constexpr double kControlFactor = 1.0 / 1024.0;

using ext = long double;

// int_a^b psi^2 (or psi^2/u) by adaptive Gauss-Kronrod, split at the seed
// handoff and at every segment boundary so each piece is smooth.
// int_a^b psi^2 (or psi^2/u) by adaptive Gauss-Kronrod, split at the seed
// handoff and at every segment boundary so each piece is smooth.
ext integrate_square(const SampledSolution& sol, double a, double b, bool over_u) {
    if (b <= a) return 0.0L;
    const auto piece = [over_u](const auto& eval, double lo, double hi) -> ext {
        const auto f = [&eval, over_u](ext u) -> ext {
            const ext p = eval(static_cast<double>(u));
            return over_u ? p * p / u : p * p;
        };
        return boost::math::quadrature::gauss_kronrod<ext, 15>::integrate(f, ext(lo), ext(hi), 6,
                                                                          ext(1e-14));
    };
    ext acc = 0.0L;
    if (a < sol.handoff()) {
        const LocalSeries& seed = sol.seed();
        acc += piece([&seed](double u) { return seed.value(u); }, a, std::min(b, sol.handoff()));
        a = sol.handoff();
        if (b <= a) return acc;
    }
    const auto segs = sol.segments();
    auto it = std::upper_bound(segs.begin(), segs.end(), a,
                               [](double v, const dopri5::DenseSegment& sg) { return v < sg.s0; });
    if (it != segs.begin()) --it;
    for (; it != segs.end() && it->s0 < b; ++it) {
        const double lo = std::max(a, it->s0);
        const double hi = std::min(b, it->end());
        if (hi <= lo) continue;
        const dopri5::DenseSegment& sg = *it;
        acc += piece([&sg](double u) { return sg.value(u); }, lo, hi);
    }
    return acc;
}

}  // namespace

SampledSolution::SampledSolution(ScalingProblem problem, LocalSeries seed, double handoff)
    : problem_(std::move(problem)), seed_(std::move(seed)), handoff_(handoff) {}

double SampledSolution::covered_end() const noexcept {
    if (crossing_) return *crossing_;
    return segments_.empty() ? handoff_ : segments_.back().end();
}

std::vector<double> SampledSolution::breakpoints() const {
    std::vector<double> out{handoff_};
    const double ratio = problem_.constants().ratio;
    if (!(ratio < 1.0)) return out;
    const double end = covered_end();
    for (double b = handoff_ / ratio; b <= end; b /= ratio) out.push_back(b);
    return out;
}

double SampledSolution::eval_unchecked(double s) const {
    if (s <= handoff_ || segments_.empty()) return seed_.value(s);
    auto it = std::upper_bound(segments_.begin(), segments_.end(), s,
                               [](double v, const dopri5::DenseSegment& seg) { return v < seg.s0; });
    if (it != segments_.begin()) --it;
    return it->value(s);
}

double SampledSolution::psi(double s) const {
    if (!(s >= 0.0) || s > covered_end() * (1.0 + 1e-14)) {
        throw OutOfDomain("argument " + std::to_string(s) + " outside the marched range");
    }
    return eval_unchecked(s);
}

double SampledSolution::dpsi(double s) const {
    if (!(s >= 0.0) || s > covered_end() * (1.0 + 1e-14)) {
        throw OutOfDomain("argument " + std::to_string(s) + " outside the marched range");
    }
    if (s <= handoff_ || segments_.empty()) return seed_.derivative(s);
    auto it = std::upper_bound(segments_.begin(), segments_.end(), s,
                               [](double v, const dopri5::DenseSegment& seg) { return v < seg.s0; });
    if (it != segments_.begin()) --it;
    return it->derivative(s);
}

std::vector<std::pair<double, double>> SampledSolution::samples() const {
    std::vector<std::pair<double, double>> out;
    out.reserve(segments_.size() + 1);
    out.emplace_back(handoff_, seed_.value(handoff_));
    for (const auto& seg : segments_) {
        const double s = std::min(seg.end(), covered_end());
        out.emplace_back(s, seg.value(s));
    }
    return out;
}

class Marcher {
public:
    static SampledSolution run(const ScalingProblem& problem, const LocalSeries& seed, double end,
                               const MarchOptions& opt);
};

namespace {

// int_a^b psi^2 over the stored solution, summed segment by segment so that
// no cancellation occurs however small psi gets. Whole-segment integrals are
// cached; psi^2 on a segment is a degree-8 polynomial, integrated exactly.
class WindowSquare {
public:
    explicit WindowSquare(const LocalSeries& seed, double handoff) : seed_(seed), handoff_(handoff) {
        // psi^2 on the seed region as a polynomial in t = s^step.
        std::vector<ext> c(seed.coeffs.size() + 1);
        c[0] = seed.psi0;
        for (std::size_t i = 0; i < seed.coeffs.size(); ++i) c[i + 1] = seed.coeffs[i];
        square_.assign(2 * c.size() - 1, 0.0L);
        for (std::size_t i = 0; i < c.size(); ++i) {
            for (std::size_t j = 0; j < c.size(); ++j) square_[i + j] += c[i] * c[j];
        }
        for (std::size_t n = 0; n < square_.size(); ++n) square_[n] /= 1.0L + ext(n) * ext(seed.step);
    }

    void on_accept(const dopri5::DenseSegment& seg) {
        // levels_[k][i] sums whole-segment integrals [i*2^k, (i+1)*2^k); only
        // positive terms are ever added, so no cancellation can occur.
        if (levels_.empty()) levels_.emplace_back();
        levels_[0].push_back(over(seg, seg.s0, seg.end()));
        for (std::size_t k = 0; levels_[k].size() % 2 == 0; ++k) {
            if (k + 1 == levels_.size()) levels_.emplace_back();
            const auto& lv = levels_[k];
            levels_[k + 1].push_back(lv[lv.size() - 2] + lv[lv.size() - 1]);
        }
    }

    ext operator()(std::span<const dopri5::DenseSegment> segs, double a, double b) const {
        ext acc = 0.0L;
        if (a < handoff_) {
            acc += seed_antiderivative(std::min(b, handoff_)) - seed_antiderivative(a);
            a = handoff_;
        }
        if (b <= a || segs.empty()) return acc;
        auto it = std::upper_bound(segs.begin(), segs.end(), a,
                                   [](double v, const dopri5::DenseSegment& sg) { return v < sg.s0; });
        if (it != segs.begin()) --it;
        std::size_t i = static_cast<std::size_t>(it - segs.begin());
        // Partial first segment.
        if (i < segs.size() && a > segs[i].s0) {
            const auto& sg = segs[i];
            acc += over(sg, a, std::min(b, sg.end()));
            ++i;
        }
        // Last segment that starts below b; partial if b falls inside it.
        std::size_t j = static_cast<std::size_t>(
            std::lower_bound(segs.begin() + static_cast<std::ptrdiff_t>(i), segs.end(), b,
                             [](const dopri5::DenseSegment& sg, double v) { return sg.s0 < v; }) -
            segs.begin());
        if (j > i && b < segs[j - 1].end()) {
            acc += over(segs[j - 1], segs[j - 1].s0, b);
            --j;
        }
        acc += whole_sum(i, j);
        return acc;
    }

private:
    static ext over(const dopri5::DenseSegment& seg, double lo, double hi) {
        const auto f = [&seg](ext u) {
            const ext p = seg.value(static_cast<double>(u));
            return p * p;
        };
        return boost::math::quadrature::gauss<ext, 7>::integrate(f, ext(lo), ext(hi));
    }

    ext whole_sum(std::size_t i, std::size_t j) const {
        ext acc = 0.0L;
        for (std::size_t k = 0; i < j; ++k, i >>= 1, j >>= 1) {
            if (i & 1U) acc += levels_[k][i++];
            if (j & 1U) acc += levels_[k][--j];
        }
        return acc;
    }

    // int_0^s psi^2 for the seed expansion, exact term by term.
    ext seed_antiderivative(double s) const {
        if (!(s > 0.0)) return 0.0L;
        const ext t = seed_.step == 1.0 ? ext(s) : std::exp(ext(seed_.step) * std::log(ext(s)));
        ext acc = 0.0L;
        for (auto it = square_.rbegin(); it != square_.rend(); ++it) acc = acc * t + *it;
        return ext(s) * acc;
    }

    const LocalSeries& seed_;
    double handoff_;
    std::vector<ext> square_;
    std::vector<std::vector<ext>> levels_;
};

}  // namespace

SampledSolution Marcher::run(const ScalingProblem& problem, const LocalSeries& seed, double end,
                             const MarchOptions& opt) {
    if (!(opt.tol >= kMinTol && opt.tol <= kMaxTol)) {
        throw InputError("march tolerance must lie in [1e-12, 1e-4]");
    }
    if (seed.regime != problem.regime()) {
        throw InputError("seed series belongs to a different regime");
    }
    const double handoff = opt.handoff.value_or(seed.handoff(opt.handoff_cap));
    if (!(handoff > 0.0) || !std::isfinite(handoff)) {
        throw InputError("series handoff point must be positive and finite");
    }
    if (!(end > handoff)) {
        throw InputError("march end must lie beyond the series handoff point");
    }

    SampledSolution sol(problem, seed, handoff);
    const double control_tol = opt.tol * kControlFactor;
    const DelayEquation eq = problem.equation();
    const double ratio = eq.ratio;
    const bool same_point = !(ratio < 1.0);
    // Steps never let ratio*s reach past the last accepted point, so history
    // is always already known (the interval recursion of the pantograph form).
    const double max_stretch = same_point ? std::numeric_limits<double>::infinity() : (1.0 / ratio - 1.0);

    const auto f = [&](double s, double y) {
        const double delayed = same_point ? y : sol.eval_unchecked(ratio * s);
        return eq.rhs(s, y, delayed);
    };

    // The non-gelling ODE form carries a spurious mode C/y that decays far
    // slower than psi itself; each accepted point is re-anchored on
    // (1-lambda) y psi(y) = int_{ry}^{y} psi^2, which has no such mode.
    const bool reanchor = problem.regime() == Regime::NonGelling;
    WindowSquare window(sol.seed_, handoff);

    double s = handoff;
    double y = seed.value(s);
    double k1 = f(s, y);
    double h = std::min(0.01 * s, 0.5 * (end - s));
    std::size_t steps = 0;

    while (s < end) {
        if (++steps > opt.max_steps) {
            throw NumericalError("march exceeded the step budget");
        }
        h = std::min({h, max_stretch * s, end - s});
        const dopri5::ScalarStep st = dopri5::step_scalar(f, s, y, k1, h);
        const double scale = control_tol * std::max({std::abs(y), std::abs(st.y1), kValueFloor});
        const double err = std::abs(st.err) / scale;
        if (!std::isfinite(err) || !std::isfinite(st.y1)) {
            h *= 0.2;
            if (h < 1e-14 * s) throw NumericalError("step size underflow while marching");
            continue;
        }
        const double fac = 0.9 * std::pow(std::max(err, 1e-10), -1.0 / dopri5::kOrder);
        if (err > 1.0) {
            h *= std::max(0.2, fac);
            if (h < 1e-14 * s) throw NumericalError("step size underflow while marching");
            continue;
        }

        sol.segments_.push_back(st.dense);
        const double s_next = (end - (s + h) <= 1e-15 * end) ? end : s + h;
        if (st.y1 <= 0.0) {
            const dopri5::DenseSegment& seg = sol.segments_.back();
            double lo = s, hi = s + h;
            while (hi - lo > kCrossingTol * std::max(1.0, lo)) {
                const double mid = 0.5 * (lo + hi);
                (seg.value(mid) > 0.0 ? lo : hi) = mid;
            }
            sol.crossing_ = 0.5 * (lo + hi);
            if (!opt.allow_crossing) throw NegativeCrossing(*sol.crossing_);
            return sol;
        }
        window.on_accept(sol.segments_.back());
        s = s_next;
        y = st.y1;
        k1 = st.k7;
        if (reanchor) {
            const ext integral = window(sol.segments_, ratio * s, s);
            y = static_cast<double>(integral / (ext(1.0 - problem.lambda()) * s));
            k1 = f(s, y);
        }
        if (y < kDecayThreshold) {
            sol.decayed_ = true;
            break;
        }
        h *= std::min(5.0, fac);
    }

    if (opt.verify && opt.checkpoints > 0) {
        sol.residual_max_ = verify_residual(sol, opt.checkpoints);
        if (sol.residual_max_ > kBlowupFactor * opt.tol) {
            std::ostringstream msg;
            msg << "integral-form residual " << std::scientific << sol.residual_max_
                << " exceeds 100*tol";
            throw ResidualBlowup(msg.str());
        }
    }
    return sol;
}

SampledSolution march(const ScalingProblem& problem, const LocalSeries& seed, double end,
                      const MarchOptions& options) {
    return Marcher::run(problem, seed, end, options);
}

SampledSolution march(const ScalingProblem& problem, const LocalSeries& seed, double end,
                      double tol) {
    MarchOptions opt;
    opt.tol = tol;
    return Marcher::run(problem, seed, end, opt);
}

double integral_residual(const SampledSolution& sol, double s) {
    const ScalingProblem& p = sol.problem();
    const ScalingConstants& k = p.constants();
    switch (p.regime()) {
        case Regime::NonGelling: {
            const ext lhs = ext(1.0 - p.lambda()) * s * ext(sol.psi(s));
            const ext rhs = integrate_square(sol, k.ratio * s, s, false);
            return static_cast<double>(std::abs(lhs - rhs) / lhs);
        }
        case Regime::Gelling: {
            const bool same_point = !(k.ratio < 1.0);
            const double a = same_point ? 0.5 * s : k.ratio * s;
            const ext pa = sol.psi(a);
            const ext ps = sol.psi(s);
            ext rhs = integrate_square(sol, a, s, false);
            if (same_point) {
                rhs -= ext(k.weight) * rhs;
            } else {
                rhs -= ext(k.weight / k.ratio) * integrate_square(sol, k.ratio * a, k.ratio * s, false);
            }
            const ext scale = std::max(std::abs(pa), std::abs(ps));
            return static_cast<double>(std::abs(ps - pa - rhs) / scale);
        }
        case Regime::Marginal: {
            const ext psi0 = sol.seed().psi0;
            const ext constant = psi0 - std::numbers::ln2_v<ext> * psi0 * psi0;
            const ext ps = sol.psi(s);
            const ext rhs = constant + integrate_square(sol, 0.5 * s, s, true);
            return static_cast<double>(std::abs(ps - rhs) / std::abs(ps));
        }
    }
    return 0.0;
}

double verify_residual(const SampledSolution& sol, int count) {
    const double lo = sol.handoff();
    const double hi = sol.covered_end();
    if (count <= 0 || !(hi > lo)) return 0.0;
    double worst = 0.0;
    const double log_lo = std::log(lo);
    const double log_hi = std::log(hi);
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 1.0 : static_cast<double>(i) / (count - 1);
        const double s = std::min(hi, std::exp(log_lo + t * (log_hi - log_lo)));
        worst = std::max(worst, integral_residual(sol, s));
    }
    return worst;
}

double phi_from_psi(const ScalingProblem& problem, const SampledSolution& solution, double x) {
    if (problem.regime() == Regime::Gelling && !(problem.constants().sigma > 0.0)) {
        throw RegimeViolation("x <-> zeta map is singular at tau = lambda + 1");
    }
    if (!(x > 0.0)) throw OutOfDomain("x must be positive");
    const double s = problem.map().to_var(x);
    return problem.map().phi_from_psi(x, solution.psi(s));
}

DecayBoundReport check_decay_bound(const SampledSolution& sol) {
    DecayBoundReport rep;
    const Regime regime = sol.regime();
    if (regime == Regime::Gelling) return rep;
    const ScalingConstants& k = sol.problem().constants();
    if (sol.covered_end() < sol.handoff() * std::pow(k.ratio, -5.0)) {
        throw InputError("decay-bound check needs at least five delay intervals");
    }
    rep.applicable = true;
    rep.max_violation = -std::numeric_limits<double>::infinity();

    std::vector<double> points;
    for (int i = 0; i < 16; ++i) {
        points.push_back(sol.handoff() * std::pow(10.0, -3.0 + 3.0 * i / 16.0));
    }
    for (const auto& [s, v] : sol.samples()) points.push_back(s);

    for (double s : points) {
        const double delayed = sol.psi(k.ratio * s);
        const double bound = regime == Regime::NonGelling
                                 ? delayed * delayed / k.psi0
                                 : std::numbers::ln2 * delayed * delayed;
        if (!(bound > 0.0)) continue;
        const double v = (sol.psi(s) - bound) / bound;
        ++rep.points;
        if (v > rep.max_violation) {
            rep.max_violation = v;
            rep.worst_at = s;
        }
    }
    rep.holds = rep.max_violation <= 1e-10;
    return rep;
}

namespace {

// Least-squares line through (x, ln psi); rate is minus the slope.
TailFit log_linear_fit(const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 3) throw InsufficientDecay("too few samples in the last six decades");
    double mx = 0.0, my = 0.0;
    for (const auto& [a, b] : pts) {
        mx += a;
        my += b;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [a, b] : pts) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    TailFit fit;
    fit.rate = -sxy / sxx;
    fit.quality = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.x_lo = pts.front().first;
    fit.x_hi = pts.back().first;
    return fit;
}

constexpr double kTailSpan = 1e6;

}  // namespace

TailFit fit_exponential_tail(std::span<const double> x, std::span<const double> psi) {
    if (x.size() != psi.size() || x.size() < 3) {
        throw InsufficientDecay("tail fit needs at least three samples");
    }
    double pmax = 0.0;
    const double pend = psi.back();
    for (double p : psi) pmax = std::max(pmax, p);
    if (!(pend > 0.0) || pmax / pend < kTailSpan) {
        throw InsufficientDecay("psi spans fewer than six decades");
    }
    const double cut = pend * kTailSpan;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (psi[i] > 0.0 && psi[i] <= cut) pts.emplace_back(x[i], std::log(psi[i]));
    }
    return log_linear_fit(pts);
}

TailFit fit_exponential_tail(const SampledSolution& sol) {
    const auto smp = sol.samples();
    double pmax = 0.0;
    for (const auto& [s, v] : smp) pmax = std::max(pmax, v);
    const double pend = smp.back().second;
    if (!(pend > 0.0) || pmax / pend < kTailSpan) {
        throw InsufficientDecay("psi spans fewer than six decades");
    }
    // First sample inside the last six decades, then resample uniformly in x.
    const double cut = pend * kTailSpan;
    double s_lo = smp.back().first;
    for (auto it = smp.rbegin(); it != smp.rend() && it->second <= cut; ++it) s_lo = it->first;
    const VariableMap& map = sol.problem().map();
    const double x_lo = map.to_x(s_lo);
    const double x_hi = map.to_x(sol.covered_end());
    constexpr int kPoints = 256;
    std::vector<std::pair<double, double>> pts;
    pts.reserve(kPoints);
    for (int i = 0; i < kPoints; ++i) {
        const double x = x_lo + (x_hi - x_lo) * i / (kPoints - 1);
        const double v = sol.psi(std::min(map.to_var(x), sol.covered_end()));
        if (v > 0.0) pts.emplace_back(x, std::log(v));
    }
    return log_linear_fit(pts);
}

std::vector<SolutionRow> tabulate(const SampledSolution& sol, double from, double to, int count) {
    const ScalingProblem& p = sol.problem();
    if (p.regime() == Regime::Gelling && !(p.constants().sigma > 0.0)) {
        throw RegimeViolation("x <-> zeta map is singular at tau = lambda + 1");
    }
    if (!(from > 0.0) || !(to >= from) || count < 1) {
        throw InputError("tabulation range must be positive and increasing");
    }
    std::vector<SolutionRow> rows;
    rows.reserve(count);
    const double la = std::log(from), lb = std::log(to);
    for (int i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        const double s = std::min(to, std::exp(la + t * (lb - la)));
        const double v = sol.psi(s);
        const double x = p.map().to_x(s);
        rows.push_back({s, v, x, p.map().phi_from_psi(x, v)});
    }
    return rows;
}

void write_solution_csv(std::ostream& out, std::span<const SolutionRow> rows,
                        std::span<const std::string> comments) {
    for (const auto& c : comments) out << "# " << c << '\n';
    out << "var,psi,x,phi\n";
    out << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.var << ',' << r.psi << ',' << r.x << ',' << r.phi << '\n';
    }
}

}  // namespace aggscale
