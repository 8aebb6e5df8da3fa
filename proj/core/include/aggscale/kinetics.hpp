#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "aggscale/pantograph.hpp"

namespace aggscale {

/// Concentrations c_j of clusters of mass m_j = 2^j, j = 0..j_max, at time t.
struct KineticsState {
    double t = 0.0;
    std::vector<double> c;
    double m0 = 0.0;  ///< sum c_j
    double m1 = 0.0;  ///< sum m_j c_j
    double m2 = 0.0;  ///< sum m_j^2 c_j
    double leaked = 0.0;  ///< mass carried past j_max by top-bin reactions

    /// Mean cluster size M2/M1.
    [[nodiscard]] double mean_size() const noexcept { return m2 / m1; }
};

struct KineticsOptions {
    double tol = 1e-8;
    double c0 = 1.0;          ///< monodisperse initial concentration at j = 0
    double t_first = 1e-2;    ///< first snapshot after t = 0
    double snapshot_ratio = 2.0;  ///< geometric spacing of snapshot times
    std::size_t max_steps = 5'000'000;
    /// Stop once leaked mass exceeds this fraction of the initial mass.
    std::optional<double> stop_leak_fraction;
};

struct KineticsSeries {
    double lambda = 0.0;
    int j_max = 0;
    double tol = 0.0;
    /// Snapshots at t = 0 and on the geometric grid up to t_end (or the stop).
    std::vector<KineticsState> snapshots;
    /// First time M2 reached 10^3 M2(0), by log-linear interpolation between steps.
    std::optional<double> m2_kilo_time;
    std::size_t steps = 0;
    bool stopped_early = false;
};

/// Leaked fraction below which a snapshot counts as untouched by truncation.
inline constexpr double kPreTruncationLeak = 1e-9;

/// Integrates dc_j/dt = K_{j-1} c_{j-1}^2 / 2 - K_j c_j^2, K_j = 2^(j lambda),
/// from c = c0 at j = 0 with Dormand-Prince 5(4). Top-bin reactions feed
/// `leaked`. Throws NegativeConcentration if some c_j < -tol.
[[nodiscard]] KineticsSeries simulate(double lambda, int j_max, double t_end,
                                      const KineticsOptions& options = {});

/// Index one past the last snapshot with leaked <= kPreTruncationLeak * M1(0).
[[nodiscard]] std::size_t pre_truncation_end(const KineticsSeries& series);

/// Least-squares slope of ln(M2/M1) against ln t over the last decade of the
/// pre-truncation snapshots. InputError if that era spans less than a decade.
[[nodiscard]] double growth_exponent(const KineticsSeries& series);

/// max_t |M1 + leaked - M1(0)| / M1(0) over all snapshots.
[[nodiscard]] double mass_defect(const KineticsSeries& series);

struct CollapseSnapshot {
    double t = 0.0;
    double s = 0.0;               ///< mean size M2/M1
    std::vector<double> x;        ///< m_j / s
    std::vector<double> y;        ///< s c_j / (M1 ln 2): density in log-mass, comparable to x Phi(x)
    double amplitude = 1.0;       ///< fitted A in y ~ A F(b x)
    double scale = 1.0;           ///< fitted b
    double fit_distance = 0.0;    ///< L-infinity distance after the fit
};

struct CollapseReport {
    std::vector<CollapseSnapshot> snapshots;
    /// L-infinity distance between consecutive rescaled snapshots.
    std::vector<double> self_distance;
    double x_lo = 0.0;
    double x_hi = 0.0;
};

/// Rescaled snapshot for state `st`.
[[nodiscard]] CollapseSnapshot rescale(const KineticsState& st);

/// L-infinity distance between two rescaled snapshots over their common x
/// range inside [x_lo, x_hi], interpolating b linearly in ln x.
[[nodiscard]] double snapshot_distance(const CollapseSnapshot& a, const CollapseSnapshot& b,
                                       double x_lo, double x_hi);

/// Compares the snapshots inside t_window with each other and with x Phi(x)
/// from the marched scaling solution (same lambda < 1), after fitting an
/// amplitude A and scale b per snapshot. Points with x outside [x_lo, x_hi]
/// are ignored. WindowTooEarly if s grows less than 10^3-fold inside the
/// window; OutOfDomain if the window reaches past the pre-truncation era.
[[nodiscard]] CollapseReport collapse(const KineticsSeries& series, const SampledSolution& scaling,
                                      std::pair<double, double> t_window, double x_lo = 0.05,
                                      double x_hi = 8.0);

/// Long-format CSV `t,j,m,c`.
void write_snapshot_csv(std::ostream& out, const KineticsSeries& series);
/// CSV `t,M0,M1,M2,leaked`.
void write_moments_csv(std::ostream& out, const KineticsSeries& series);

}  // namespace aggscale
