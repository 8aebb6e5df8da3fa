#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aggscale/dopri5.hpp"
#include "aggscale/model.hpp"
#include "aggscale/series.hpp"

namespace aggscale {

struct MarchOptions {
    double tol = 1e-10;
    /// Log-spaced points at which the integral form is re-checked.
    int checkpoints = 64;
    /// Upper bound on the series handoff point (in the marching variable).
    double handoff_cap = 1.0;
    /// If set, overrides radius_est/4 as the handoff point.
    std::optional<double> handoff;
    /// Stop (instead of throwing) when psi reaches zero.
    bool allow_crossing = false;
    /// Skip the integral-form verification (used inside the tau search).
    bool verify = true;
    std::size_t max_steps = 20'000'000;
};

/// Underflow edge at which a decaying march stops.
inline constexpr double kDecayThreshold = 1e-300;

/// psi on [0, covered_end]: the seed series up to the handoff point, then the
/// dense output of every accepted step.
class SampledSolution {
public:
    SampledSolution(ScalingProblem problem, LocalSeries seed, double handoff);

    [[nodiscard]] Regime regime() const noexcept { return problem_.regime(); }
    [[nodiscard]] const ScalingProblem& problem() const noexcept { return problem_; }
    [[nodiscard]] const LocalSeries& seed() const noexcept { return seed_; }
    [[nodiscard]] double handoff() const noexcept { return handoff_; }
    [[nodiscard]] double covered_end() const noexcept;
    [[nodiscard]] std::span<const dopri5::DenseSegment> segments() const noexcept { return segments_; }
    /// Delay-interval endpoints handoff * ratio^-n inside the covered range.
    [[nodiscard]] std::vector<double> breakpoints() const;
    [[nodiscard]] double residual_max() const noexcept { return residual_max_; }
    [[nodiscard]] bool decayed() const noexcept { return decayed_; }
    [[nodiscard]] std::optional<double> crossing() const noexcept { return crossing_; }

    /// psi(s). Throws OutOfDomain outside [0, covered_end].
    [[nodiscard]] double psi(double s) const;
    [[nodiscard]] double dpsi(double s) const;
    /// psi at the handoff point and at the end of every step.
    [[nodiscard]] std::vector<std::pair<double, double>> samples() const;

private:
    friend class Marcher;

    [[nodiscard]] double eval_unchecked(double s) const;

    ScalingProblem problem_;
    LocalSeries seed_;
    double handoff_;
    std::vector<dopri5::DenseSegment> segments_;
    double residual_max_ = 0.0;
    bool decayed_ = false;
    std::optional<double> crossing_;
    mutable std::size_t hint_ = 0;
};

/// March the delay equation of `problem` from the seed up to `end` (in the
/// marching variable). Throws NegativeCrossing unless options.allow_crossing,
/// ResidualBlowup when the integral form misses by more than 100*tol.
[[nodiscard]] SampledSolution march(const ScalingProblem& problem, const LocalSeries& seed,
                                    double end, const MarchOptions& options = {});

[[nodiscard]] SampledSolution march(const ScalingProblem& problem, const LocalSeries& seed,
                                    double end, double tol);

/// Relative defect of the integral form at s:
///   non-gelling  (1-lambda) s psi(s) = int_{r s}^{s} psi^2
///   gelling      psi(s) - psi(a) = int_a^s psi^2 - (w/r) int_{r a}^{r s} psi^2,  a = r s
///   marginal     psi(x) = 1 - ln 2 + int_{x/2}^{x} psi(u)^2 du/u
[[nodiscard]] double integral_residual(const SampledSolution& solution, double s);

/// Max of integral_residual over `count` log-spaced points in [handoff, end].
[[nodiscard]] double verify_residual(const SampledSolution& solution, int count);

/// Phi(x) reconstructed from psi through the problem's variable map.
[[nodiscard]] double phi_from_psi(const ScalingProblem& problem, const SampledSolution& solution,
                                  double x);

struct DecayBoundReport {
    bool applicable = false;
    std::size_t points = 0;
    /// max over points of (psi(s) - bound(s)) / bound(s); <= 0 when the bound holds
    double max_violation = 0.0;
    double worst_at = 0.0;
    bool holds = true;
};

/// Checks psi(y) <= psi(r y)^2 / psi0 (non-gelling) or psi(x) <= ln 2 psi(x/2)^2
/// (marginal) at every stored sample. Violations are reported, never thrown.
[[nodiscard]] DecayBoundReport check_decay_bound(const SampledSolution& solution);

struct TailFit {
    double rate = 0.0;     ///< a in psi ~ C exp(-a x)
    double quality = 0.0;  ///< R^2 of the linear fit of log psi against x
    double x_lo = 0.0;
    double x_hi = 0.0;
};

/// Least-squares fit of log psi against x over the last six decades of psi.
/// Throws InsufficientDecay if psi spans fewer than six decades.
[[nodiscard]] TailFit fit_exponential_tail(const SampledSolution& solution);
[[nodiscard]] TailFit fit_exponential_tail(std::span<const double> x, std::span<const double> psi);

struct SolutionRow {
    double var;
    double psi;
    double x;
    double phi;
};

/// `count` rows at log-spaced points of the marching variable in [from, to].
[[nodiscard]] std::vector<SolutionRow> tabulate(const SampledSolution& solution, double from,
                                                double to, int count);

/// CSV with header `var,psi,x,phi`, 17 significant digits. `comments` are
/// written first, each prefixed with "# ".
void write_solution_csv(std::ostream& out, std::span<const SolutionRow> rows,
                        std::span<const std::string> comments);

}  // namespace aggscale
