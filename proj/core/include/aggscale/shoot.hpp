#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aggscale/model.hpp"
#include "aggscale/pantograph.hpp"

namespace aggscale {

/// Long-range fate of a gelling trajectory psi(zeta).
enum class Verdict { NegativeCrossing, AlgebraicTail, FastDecay, Undecided };

[[nodiscard]] std::string_view to_string(Verdict verdict) noexcept;

/// Estimated tail slope d ln psi / d ln zeta with a 95% confidence interval.
struct TailExponent {
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct TrajectoryVerdict {
    Verdict tag = Verdict::Undecided;
    /// Present iff tag == NegativeCrossing.
    std::optional<double> crossing_location;
    /// Present iff tag == AlgebraicTail.
    std::optional<TailExponent> tail_exponent;
    /// Dominant period of the log-periodic component, in units of ln zeta.
    std::optional<double> oscillation_period;
    /// Width (in ln zeta) of the window the tail slope was fitted over.
    double fit_window = 0.0;
    /// How far the march got.
    double covered_end = 0.0;
};

/// Result of a log-periodic tail fit on a uniform grid in u = ln zeta.
struct LogPeriodicFit {
    double slope = 0.0;
    double slope_stderr = 0.0;
    std::optional<double> period;  ///< ln-zeta period if a component was detected
    double u_lo = 0.0;
    double u_hi = 0.0;
};

/// Tail analysis of samples g(u) = ln psi on a uniform grid u = ln zeta:
/// `plain` is the least-squares slope over the final `window`; when the
/// periodogram finds a dominant period, `harmonic` refits the slope together
/// with that period's harmonics over a whole number of periods spanning at
/// least `window`.
struct TailAnalysis {
    LogPeriodicFit plain;
    std::optional<LogPeriodicFit> harmonic;
};

[[nodiscard]] TailAnalysis analyze_log_tail(std::span<const double> u, std::span<const double> g,
                                            double window);

/// Dominant period of `r` (uniform grid `u`) from a least-squares periodogram:
/// for each trial period in [min_period, max_period] a line plus one sinusoid
/// is fitted. nullopt when the best sinusoid removes less than 40% of the
/// variance left by the line alone.
[[nodiscard]] std::optional<double> dominant_period(std::span<const double> u,
                                                    std::span<const double> r, double min_period,
                                                    double max_period);

/// Slope band around -1 accepted as a zeta^-1 tail.
inline constexpr double kTailSlopeBand = 0.15;

/// Marches the gelling problem to `horizon` (in zeta) and classifies it:
/// NegativeCrossing if psi reaches zero, FastDecay if psi underflows, else the
/// tail slope over the final two decades decides AlgebraicTail or Undecided.
/// RegimeViolation outside the gelling regime; InputError if the horizon covers
/// fewer than ten delay intervals. ResidualBlowup propagates.
[[nodiscard]] TrajectoryVerdict classify(const ScalingProblem& problem, double horizon, double tol);

/// Classifies every tau in `taus` on its own thread (at most `threads` at once;
/// 0 means hardware concurrency). Results are in input order.
[[nodiscard]] std::vector<TrajectoryVerdict> classify_grid(double lambda,
                                                           std::span<const double> taus,
                                                           double horizon, double tol,
                                                           unsigned threads = 0);

struct TauSearchOptions {
    double tol_tau = 1e-7;
    double horizon = 1e24;
    double march_tol = 1e-11;
    /// Called after every classification with the probed tau and its verdict.
    std::function<void(double, const TrajectoryVerdict&)> on_probe;
};

struct TauSearchResult {
    double lambda = 0.0;
    double tau_star = 0.0;
    std::pair<double, double> bracket{};  ///< (NegativeCrossing, AlgebraicTail)
    double sigma = 0.0;                   ///< 1 + lambda - tau_star
    std::size_t evaluations = 0;
    double march_tol = 0.0;
    /// Probes whose verdict was FastDecay (treated as AlgebraicTail).
    std::vector<double> fast_decay_hits;
};

/// Bisects tau over the open window ((lambda+3)/2, lambda+1) down to a bracket
/// of width <= tol_tau. Undecided probes are re-marched with the horizon doubled,
/// at most four times, before HorizonExhausted. BracketFailure if the window
/// ends do not classify as NegativeCrossing (low) / AlgebraicTail (high).
[[nodiscard]] TauSearchResult find_tau(double lambda, const TauSearchOptions& options = {});

/// JSON object {"lambda","tau_star","bracket":[lo,hi],"sigma","evaluations","march_tol"}.
[[nodiscard]] std::string to_json(const TauSearchResult& result);

/// Phi(x) = x^-tau psi(zeta(x)) at `samples` log-spaced x in [x_lo, x_hi],
/// marched at tau_star. Throws NegativeCrossing if psi reaches zero before x_hi.
[[nodiscard]] std::vector<SolutionRow> extract_scaling_function(double lambda, double tau_star,
                                                                int samples, double x_lo = 1e-4,
                                                                double x_hi = 10.0,
                                                                double march_tol = 1e-11);

}  // namespace aggscale
