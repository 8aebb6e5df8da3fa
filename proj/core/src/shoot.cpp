#include "aggscale/shoot.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>

#include <Eigen/Dense>
#include "json.hpp"

#include "aggscale/errors.hpp"
#include "aggscale/series.hpp"

namespace aggscale {

namespace {

constexpr int kSeedTerms = 20;
constexpr double kSeedCap = 1.0;
constexpr int kSamplesPerDecade = 100;
constexpr double kTailDecades = 2.0;
constexpr int kMinDelayIntervals = 10;
constexpr int kHorizonDoublings = 4;
constexpr int kTrialPeriods = 400;
constexpr double kPeriodExplained = 0.4;
constexpr int kMaxHarmonics = 8;
constexpr double kZ95 = 1.959963984540054;

struct LinearFit {
    Eigen::VectorXd coef;
    double ssr = 0.0;
    double slope_stderr = 0.0;
};

// Least squares on columns [1, u, cos(k w u), sin(k w u) for k = 1..harmonics].
LinearFit fit_columns(std::span<const double> u, std::span<const double> g, double period,
                      int harmonics) {
    const auto n = static_cast<Eigen::Index>(u.size());
    const Eigen::Index p = 2 + 2 * harmonics;
    Eigen::MatrixXd a(n, p);
    Eigen::VectorXd b(n);
    const double u0 = u.front();
    const double w = harmonics > 0 ? 2.0 * std::numbers::pi / period : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ui = u[static_cast<std::size_t>(i)];
        a(i, 0) = 1.0;
        a(i, 1) = ui - u0;
        for (int k = 1; k <= harmonics; ++k) {
            a(i, 2 * k) = std::cos(k * w * ui);
            a(i, 2 * k + 1) = std::sin(k * w * ui);
        }
        b(i) = g[static_cast<std::size_t>(i)];
    }
    LinearFit fit;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    fit.coef = qr.solve(b);
    const Eigen::VectorXd res = b - a * fit.coef;
    fit.ssr = res.squaredNorm();
    if (n > p) {
        const double s2 = fit.ssr / static_cast<double>(n - p);
        const Eigen::MatrixXd cov = (a.transpose() * a).inverse() * s2;
        fit.slope_stderr = std::sqrt(std::max(0.0, cov(1, 1)));
    }
    return fit;
}

double total_variance(std::span<const double> r) {
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(r.size());
    double s = 0.0;
    for (double v : r) s += (v - mean) * (v - mean);
    return s;
}

std::size_t first_index_at_or_above(std::span<const double> u, double value) {
    return static_cast<std::size_t>(std::lower_bound(u.begin(), u.end(), value) - u.begin());
}

}  // namespace

std::string_view to_string(Verdict verdict) noexcept {
    switch (verdict) {
        case Verdict::NegativeCrossing: return "NegativeCrossing";
        case Verdict::AlgebraicTail: return "AlgebraicTail";
        case Verdict::FastDecay: return "FastDecay";
        case Verdict::Undecided: return "Undecided";
    }
    return "Unknown";
}

std::optional<double> dominant_period(std::span<const double> u, std::span<const double> r,
                                      double min_period, double max_period) {
    if (u.size() != r.size() || u.size() < 16 || !(max_period > min_period) || !(min_period > 0.0)) {
        return std::nullopt;
    }
    // Variance left after removing the straight line, to measure what a
    // sinusoid on top of it explains.
    const LinearFit base = fit_columns(u, r, 1.0, 0);
    if (!(base.ssr > 1e-14 * std::max(1.0, total_variance(r)))) return std::nullopt;
    double best_period = 0.0;
    double best_ssr = base.ssr;
    const double lmin = std::log(min_period);
    const double lmax = std::log(max_period);
    for (int i = 0; i < kTrialPeriods; ++i) {
        const double period = std::exp(lmin + (lmax - lmin) * i / (kTrialPeriods - 1));
        const LinearFit f = fit_columns(u, r, period, 1);
        if (f.ssr < best_ssr) {
            best_ssr = f.ssr;
            best_period = period;
        }
    }
    if (best_period == 0.0 || 1.0 - best_ssr / base.ssr < kPeriodExplained) return std::nullopt;
    return best_period;
}

TailAnalysis analyze_log_tail(std::span<const double> u, std::span<const double> g, double window) {
    if (u.size() != g.size() || u.size() < 16) {
        throw InputError("tail analysis needs at least 16 samples");
    }
    if (!(window > 0.0) || u.back() - u.front() < window) {
        throw InputError("samples span less than the tail window");
    }
    TailAnalysis out;
    const std::size_t i0 = first_index_at_or_above(u, u.back() - window);
    {
        const auto uu = u.subspan(i0);
        const auto gg = g.subspan(i0);
        const LinearFit f = fit_columns(uu, gg, 1.0, 0);
        out.plain = {f.coef(1), f.slope_stderr, std::nullopt, uu.front(), uu.back()};
    }

    // Periodic component over the whole range; at least two periods must fit.
    const double du = (u.back() - u.front()) / static_cast<double>(u.size() - 1);
    const double span = u.back() - u.front();
    const auto period = dominant_period(u, g, 10.0 * du, 0.5 * span);
    if (!period) return out;
    out.plain.period = period;

    const double whole = std::ceil(window / *period - 1e-9) * *period;
    if (whole > span) return out;
    const std::size_t j0 = first_index_at_or_above(u, u.back() - whole);
    const auto uu = u.subspan(j0);
    const auto gg = g.subspan(j0);
    const int harmonics =
        std::clamp(static_cast<int>(*period / (8.0 * du)), 1, kMaxHarmonics);
    const LinearFit f = fit_columns(uu, gg, *period, harmonics);
    out.harmonic = LogPeriodicFit{f.coef(1), f.slope_stderr, period, uu.front(), uu.back()};
    return out;
}

TrajectoryVerdict classify(const ScalingProblem& problem, double horizon, double tol) {
    if (problem.regime() != Regime::Gelling) {
        throw RegimeViolation("trajectory classification applies to the gelling regime only");
    }
    const LocalSeries seed = series_for(problem, kSeedTerms);
    const double handoff = seed.handoff(kSeedCap);
    const double ratio = problem.constants().ratio;
    if (!(horizon >= handoff * std::pow(ratio, -kMinDelayIntervals))) {
        throw InputError("horizon must cover at least ten delay intervals");
    }
    MarchOptions opt;
    opt.tol = tol;
    opt.allow_crossing = true;
    opt.handoff = handoff;
    const SampledSolution sol = march(problem, seed, horizon, opt);

    TrajectoryVerdict v;
    v.covered_end = sol.covered_end();
    if (sol.crossing()) {
        v.tag = Verdict::NegativeCrossing;
        v.crossing_location = sol.crossing();
        return v;
    }
    if (sol.decayed()) {
        v.tag = Verdict::FastDecay;
        return v;
    }

    // ln psi on a uniform ln zeta grid from the seed region to the horizon.
    const double u_lo = std::log(handoff);
    const double u_hi = std::log(sol.covered_end());
    const auto n = static_cast<std::size_t>(
        std::ceil((u_hi - u_lo) / std::numbers::ln10 * kSamplesPerDecade)) + 1;
    std::vector<double> u(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = u_lo + (u_hi - u_lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        g[i] = std::log(sol.psi(std::min(std::exp(u[i]), sol.covered_end())));
    }
    const double window = kTailDecades * std::numbers::ln10;
    if (u_hi - u_lo < window) {
        v.tag = Verdict::Undecided;
        return v;
    }
    const TailAnalysis tail = analyze_log_tail(u, g, window);
    v.oscillation_period = tail.plain.period;

    const auto accept = [&v](const LogPeriodicFit& f) {
        if (std::abs(f.slope + 1.0) > kTailSlopeBand) return false;
        v.tag = Verdict::AlgebraicTail;
        v.tail_exponent = TailExponent{f.slope, f.slope - kZ95 * f.slope_stderr,
                                       f.slope + kZ95 * f.slope_stderr};
        v.fit_window = f.u_hi - f.u_lo;
        return true;
    };
    if (accept(tail.plain)) return v;
    if (tail.harmonic && accept(*tail.harmonic)) return v;
    v.tag = Verdict::Undecided;
    return v;
}

std::vector<TrajectoryVerdict> classify_grid(double lambda, std::span<const double> taus,
                                             double horizon, double tol, unsigned threads) {
    std::vector<TrajectoryVerdict> out(taus.size());
    std::vector<std::exception_ptr> errors(taus.size());
    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, taus.size())));
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < taus.size(); i = next++) {
                    try {
                        out[i] = classify(make_problem(lambda, taus[i]), horizon, tol);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

TauSearchResult find_tau(double lambda, const TauSearchOptions& options) {
    if (!(lambda > 1.0)) throw RegimeViolation("the tau search needs lambda > 1");
    if (!(options.tol_tau >= 1e-9)) throw InputError("tol_tau must be at least 1e-9");
    if (!(options.horizon > 0.0)) throw InputError("horizon must be positive");

    TauSearchResult res;
    res.lambda = lambda;
    res.march_tol = options.march_tol;

    // true: crossing side (below tau*); false: positive-tail side.
    const auto probe = [&](double tau) -> bool {
        const ScalingProblem problem = make_problem(lambda, tau);
        double horizon = options.horizon;
        for (int attempt = 0; attempt <= kHorizonDoublings; ++attempt) {
            const TrajectoryVerdict v = classify(problem, horizon, options.march_tol);
            ++res.evaluations;
            if (options.on_probe) options.on_probe(tau, v);
            switch (v.tag) {
                case Verdict::NegativeCrossing: return true;
                case Verdict::AlgebraicTail: return false;
                case Verdict::FastDecay:
                    res.fast_decay_hits.push_back(tau);
                    return false;
                case Verdict::Undecided: break;
            }
            horizon *= 2.0;
        }
        throw HorizonExhausted("trajectory at tau = " + std::to_string(tau) +
                               " stayed undecided after four horizon doublings");
    };

    const double lo_edge = 0.5 * (lambda + 3.0);
    const double hi_edge = lambda + 1.0;
    const double eps = 1e-3 * (hi_edge - lo_edge);
    double lo = lo_edge + eps;
    double hi = hi_edge - eps;
    if (!probe(lo)) {
        throw BracketFailure("lower end of the tau window does not cross zero");
    }
    if (probe(hi)) {
        throw BracketFailure("upper end of the tau window crosses zero");
    }
    while (hi - lo > options.tol_tau) {
        const double mid = 0.5 * (lo + hi);
        (probe(mid) ? lo : hi) = mid;
    }
    res.bracket = {lo, hi};
    res.tau_star = 0.5 * (lo + hi);
    res.sigma = 1.0 + lambda - res.tau_star;
    return res;
}

std::string to_json(const TauSearchResult& r) {
    nlohmann::ordered_json j;
    j["lambda"] = r.lambda;
    j["tau_star"] = r.tau_star;
    j["bracket"] = {r.bracket.first, r.bracket.second};
    j["sigma"] = r.sigma;
    j["evaluations"] = r.evaluations;
    j["march_tol"] = r.march_tol;
    return j.dump();
}

std::vector<SolutionRow> extract_scaling_function(double lambda, double tau_star, int samples,
                                                  double x_lo, double x_hi, double march_tol) {
    if (!(x_lo > 0.0) || !(x_hi > x_lo) || samples < 2) {
        throw InputError("need 0 < x_lo < x_hi and at least two samples");
    }
    const ScalingProblem problem = make_problem(lambda, tau_star);
    const LocalSeries seed = series_for(problem, kSeedTerms);
    const double handoff = seed.handoff(kSeedCap);
    const double z_lo = problem.map().to_var(x_lo);
    const double z_hi = problem.map().to_var(x_hi);
    if (z_hi <= handoff) {
        // The whole range lies in the seed region; march a little past it anyway
        // so the solution object is well formed.
        MarchOptions opt;
        opt.tol = march_tol;
        opt.handoff = handoff;
        const SampledSolution sol = march(problem, seed, 2.0 * handoff, opt);
        return tabulate(sol, z_lo, z_hi, samples);
    }
    MarchOptions opt;
    opt.tol = march_tol;
    opt.handoff = handoff;
    const SampledSolution sol = march(problem, seed, z_hi, opt);
    return tabulate(sol, z_lo, z_hi, samples);
}

}  // namespace aggscale
