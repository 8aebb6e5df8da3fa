#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>

namespace aggscale::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

/// Everything that determines a run's output. Serialized into the header of
/// every file the run writes, so a file can be regenerated from itself.
struct RunConfig {
    std::string command;
    std::optional<double> lambda;
    std::optional<double> c;
    std::optional<double> tau;
    std::optional<double> a1;
    std::optional<double> tol;
    std::optional<double> horizon;
    std::optional<int> j_max;
    std::optional<double> t_end;
    std::optional<int> terms;
    std::optional<double> handoff;
    std::string out;
    std::string log_level;
    /// Command-specific numeric settings (zmax, tol_tau, rows, ...).
    std::map<std::string, double> extra;

    /// Single-line JSON object; unset fields are omitted.
    [[nodiscard]] std::string to_json() const;
};

/// Runs one subcommand. `args` excludes the program name. Results go to the
/// --out file or `out`; diagnostics and logs to `err`. Returns 0 on success,
/// 2 on invalid input or usage, 3 on numerical failure.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace aggscale::cli
