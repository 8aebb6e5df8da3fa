#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string_view>
#include <vector>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "aggscale/errors.hpp"
#include "aggscale/kinetics.hpp"
#include "aggscale/model.hpp"
#include "aggscale/pantograph.hpp"
#include "aggscale/roots.hpp"
#include "aggscale/series.hpp"
#include "aggscale/shoot.hpp"
#include "aggscale/version.hpp"

namespace aggscale::cli {

using json = nlohmann::ordered_json;

std::string RunConfig::to_json() const {
    json j;
    j["command"] = command;
    const auto put = [&j](const char* key, const auto& value) {
        if (value) j[key] = *value;
    };
    put("lambda", lambda);
    put("c", c);
    put("tau", tau);
    put("a1", a1);
    put("tol", tol);
    put("horizon", horizon);
    put("j_max", j_max);
    put("t_end", t_end);
    put("N", terms);
    put("handoff", handoff);
    for (const auto& [key, value] : extra) j[key] = value;
    j["out"] = out;
    j["log_level"] = log_level;
    return j.dump();
}

namespace {

constexpr double kDefaultTol = 1e-10;
constexpr int kDefaultTerms = 20;

/// Raw flag values shared by every subcommand; each subcommand registers the
/// subset it understands.
struct Flags {
    double lambda = 0.0;
    double c = 1.0;
    double tau = 0.0;
    double a1 = -1.0;
    double psi0 = 0.0;
    double tol = kDefaultTol;
    int terms = kDefaultTerms;
    double handoff = 0.0;
    double nongel_xmax = 50.0;
    double gel_zmax = 1000.0;
    double marginal_xmax = 50.0;
    double collapse_xmax = 60.0;
    int rows = 200;
    double tol_tau = 1e-7;
    double horizon = 1e24;
    double march_tol = 1e-11;
    int samples = 0;
    std::string phi_out;
    int j_max = 60;
    double t_end = 0.0;
    double c0 = 1.0;
    double t_first = 1e-2;
    double snapshot_ratio = 2.0;
    double stop_leak = 0.0;
    std::string snapshots_out;
    double kinetics_tol = 1e-8;
    double t_from = 1.0;
    double t_to = 0.0;
    double x_lo = 0.05;
    double x_hi = 8.0;
    std::string out;
};

struct Output {
    std::ostream& stream;
    std::unique_ptr<std::ofstream> file;
};

Output open_output(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") return {fallback, nullptr};
    auto f = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*f) throw InputError("cannot open output file " + path);
    std::ostream& s = *f;
    return {s, std::move(f)};
}

std::vector<std::string> header_comments(const RunConfig& cfg) {
    return {std::string("aggscale ") + kVersion, "run_config " + cfg.to_json()};
}

void write_comments(std::ostream& out, std::span<const std::string> comments) {
    for (const auto& c : comments) out << "# " << c << '\n';
}

json json_header(const RunConfig& cfg) {
    json j;
    j["version"] = kVersion;
    j["run_config"] = json::parse(cfg.to_json());
    return j;
}

std::string number(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

spdlog::level::level_enum log_level_from_env(std::string& name) {
    const char* env = std::getenv("AGGSCALE_LOG");
    name = env ? env : "error";
    if (name == "debug") return spdlog::level::debug;
    if (name == "info") return spdlog::level::info;
    if (name != "error") {
        throw InputError("AGGSCALE_LOG must be one of error, info, debug (got '" + name + "')");
    }
    return spdlog::level::err;
}

// ---------------------------------------------------------------------------

int cmd_delta(const Flags& f, bool has_psi0, RunConfig& cfg, std::ostream& out,
              spdlog::logger& log) {
    cfg.lambda = f.lambda;
    RootResult r;
    if (has_psi0) {
        if (f.lambda != 1.0) throw InputError("--psi0 applies only at --lambda 1");
        cfg.extra["psi0"] = f.psi0;
        r = solve_delta_marginal(f.psi0);
    } else {
        r = solve_delta_nongel(f.lambda);
    }
    log.info("delta = {} after {} iterations", r.value, r.iterations);
    json j = json_header(cfg);
    j["lambda"] = f.lambda;
    if (has_psi0) j["psi0"] = f.psi0;
    j["delta"] = r.value;
    j["residual"] = r.residual;
    j["bracket"] = {r.bracket.first, r.bracket.second};
    j["iterations"] = r.iterations;
    auto o = open_output(f.out, out);
    o.stream << j.dump() << '\n';
    return kExitOk;
}

ScalingProblem problem_from_flags(const Flags& f, bool has_tau, bool has_a1, RunConfig& cfg) {
    cfg.lambda = f.lambda;
    if (f.lambda < 1.0) {
        cfg.c = f.c;
        return make_problem(f.lambda, f.c);
    }
    if (f.lambda == 1.0) {
        if (has_tau) throw InputError("--tau applies only for lambda > 1");
        cfg.a1 = f.a1;
        return make_problem(f.lambda, f.a1);
    }
    if (!has_tau) throw InputError("--tau is required for lambda > 1");
    if (has_a1) throw InputError("--a1 applies only at lambda = 1");
    cfg.tau = f.tau;
    return make_problem(f.lambda, f.tau);
}

int cmd_series(const Flags& f, bool has_tau, bool has_a1, RunConfig& cfg, std::ostream& out,
               spdlog::logger& log) {
    const ScalingProblem p = problem_from_flags(f, has_tau, has_a1, cfg);
    cfg.terms = f.terms;
    const LocalSeries s = series_for(p, f.terms);
    log.info("series of {} terms, step {}", s.order(), s.step);

    auto comments = header_comments(cfg);
    comments.push_back("regime " + std::string(to_string(p.regime())));
    comments.push_back("psi0 " + number(s.psi0));
    comments.push_back("step " + number(s.step));
    comments.push_back("radius_est " + (s.radius_est ? number(*s.radius_est) : std::string("none")));
    auto o = open_output(f.out, out);
    write_comments(o.stream, comments);
    o.stream << "n,exponent,coeff\n" << std::setprecision(17);
    o.stream << 0 << ',' << 0.0 << ',' << s.psi0 << '\n';
    for (int n = 1; n <= s.order(); ++n) {
        o.stream << n << ',' << n * s.step << ',' << s.coeffs[static_cast<std::size_t>(n - 1)]
                 << '\n';
    }
    return kExitOk;
}

/// Marches `p` to `end` and writes the `var,psi,x,phi` table. Crossings are
/// written as a partial table when `allow_crossing`.
int solve_and_export(const ScalingProblem& p, double end, const Flags& f, bool has_handoff,
                     bool allow_crossing, RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
    cfg.tol = f.tol;
    cfg.terms = f.terms;
    cfg.extra["rows"] = f.rows;
    if (has_handoff) cfg.handoff = f.handoff;
    if (f.rows < 2) throw InputError("--rows must be at least 2");

    const LocalSeries seed = series_for(p, f.terms);
    MarchOptions opt;
    opt.tol = f.tol;
    opt.allow_crossing = allow_crossing;
    if (has_handoff) opt.handoff = f.handoff;
    const SampledSolution sol = march(p, seed, end, opt);
    log.info("marched to {} in {} segments, residual_max {}", sol.covered_end(),
             sol.segments().size(), sol.residual_max());

    auto comments = header_comments(cfg);
    comments.push_back("regime " + std::string(to_string(p.regime())));
    comments.push_back("psi0 " + number(seed.psi0));
    comments.push_back("step " + number(seed.step));
    comments.push_back("handoff " + number(sol.handoff()));
    comments.push_back("covered_end " + number(sol.covered_end()));
    comments.push_back("residual_max " + number(sol.residual_max()));
    comments.push_back(std::string("decayed ") + (sol.decayed() ? "true" : "false"));
    if (sol.crossing()) comments.push_back("negative_crossing " + number(*sol.crossing()));
    if (p.regime() != Regime::Gelling) {
        try {
            const DecayBoundReport rep = check_decay_bound(sol);
            comments.push_back("decay_bound_max_violation " + number(rep.max_violation));
        } catch (const InputError& e) {
            log.info("decay bound skipped: {}", e.what());
        }
        try {
            const TailFit tail = fit_exponential_tail(sol);
            comments.push_back("tail_rate " + number(tail.rate));
            comments.push_back("tail_r2 " + number(tail.quality));
        } catch (const NumericalError& e) {
            log.info("tail fit skipped: {}", e.what());
        }
    }

    const double to = sol.covered_end();
    const double from = std::min(sol.handoff(), to) * 1e-3;
    const auto rows = tabulate(sol, from, to, f.rows);
    auto o = open_output(f.out, out);
    write_solution_csv(o.stream, rows, comments);
    return kExitOk;
}

int cmd_solve_nongel(const Flags& f, bool has_handoff, RunConfig& cfg, std::ostream& out,
                     spdlog::logger& log) {
    cfg.lambda = f.lambda;
    cfg.c = f.c;
    cfg.extra["xmax"] = f.nongel_xmax;
    const ScalingProblem p = make_problem(f.lambda, f.c);
    return solve_and_export(p, p.map().to_var(f.nongel_xmax), f, has_handoff, false, cfg, out, log);
}

int cmd_solve_gel(const Flags& f, bool has_handoff, RunConfig& cfg, std::ostream& out,
                  spdlog::logger& log) {
    cfg.lambda = f.lambda;
    cfg.tau = f.tau;
    cfg.extra["zmax"] = f.gel_zmax;
    const ScalingProblem p = make_problem(f.lambda, f.tau);
    return solve_and_export(p, f.gel_zmax, f, has_handoff, true, cfg, out, log);
}

int cmd_solve_marginal(const Flags& f, bool has_handoff, RunConfig& cfg, std::ostream& out,
                       spdlog::logger& log) {
    cfg.lambda = 1.0;
    cfg.a1 = f.a1;
    cfg.extra["xmax"] = f.marginal_xmax;
    const ScalingProblem p = make_problem(1.0, f.a1);
    return solve_and_export(p, f.marginal_xmax, f, has_handoff, false, cfg, out, log);
}

int cmd_find_tau(const Flags& f, RunConfig& cfg, std::ostream& out, spdlog::logger& log) {
    cfg.lambda = f.lambda;
    cfg.tol = f.march_tol;
    cfg.horizon = f.horizon;
    cfg.extra["tol_tau"] = f.tol_tau;
    if (f.samples > 0) cfg.extra["samples"] = f.samples;

    TauSearchOptions opt;
    opt.tol_tau = f.tol_tau;
    opt.horizon = f.horizon;
    opt.march_tol = f.march_tol;
    opt.on_probe = [&log](double tau, const TrajectoryVerdict& v) {
        log.debug("tau {:.12f}: {}", tau, to_string(v.tag));
    };
    const TauSearchResult r = find_tau(f.lambda, opt);
    log.info("tau* = {:.10f} after {} evaluations", r.tau_star, r.evaluations);

    json j = json_header(cfg);
    const json record = json::parse(to_json(r));
    for (const auto& [key, value] : record.items()) j[key] = value;
    if (!r.fast_decay_hits.empty()) j["fast_decay_hits"] = r.fast_decay_hits;
    {
        auto o = open_output(f.out, out);
        o.stream << j.dump() << '\n';
    }

    if (f.samples > 0) {
        if (f.phi_out.empty()) throw InputError("--samples needs --phi-out");
        const auto rows = extract_scaling_function(f.lambda, r.tau_star, f.samples, 1e-4, 10.0,
                                                   f.march_tol);
        auto comments = header_comments(cfg);
        comments.push_back("tau_star " + number(r.tau_star));
        auto o = open_output(f.phi_out, out);
        write_solution_csv(o.stream, rows, comments);
    }
    return kExitOk;
}

KineticsOptions kinetics_options(const Flags& f, double tol, bool has_stop, RunConfig& cfg) {
    KineticsOptions opt;
    opt.tol = tol;
    opt.c0 = f.c0;
    opt.t_first = f.t_first;
    opt.snapshot_ratio = f.snapshot_ratio;
    cfg.extra["c0"] = f.c0;
    cfg.extra["t_first"] = f.t_first;
    cfg.extra["snapshot_ratio"] = f.snapshot_ratio;
    if (has_stop) {
        opt.stop_leak_fraction = f.stop_leak;
        cfg.extra["stop_leak"] = f.stop_leak;
    }
    return opt;
}

int cmd_simulate(const Flags& f, bool has_stop, RunConfig& cfg, std::ostream& out,
                 spdlog::logger& log) {
    cfg.lambda = f.lambda;
    cfg.j_max = f.j_max;
    cfg.t_end = f.t_end;
    cfg.tol = f.tol;
    const KineticsSeries s =
        simulate(f.lambda, f.j_max, f.t_end, kinetics_options(f, f.tol, has_stop, cfg));
    log.info("{} steps, {} snapshots", s.steps, s.snapshots.size());

    auto comments = header_comments(cfg);
    comments.push_back("steps " + std::to_string(s.steps));
    comments.push_back(std::string("stopped_early ") + (s.stopped_early ? "true" : "false"));
    comments.push_back("mass_defect " + number(mass_defect(s)));
    comments.push_back("pre_truncation_snapshots " + std::to_string(pre_truncation_end(s)));
    if (s.m2_kilo_time) comments.push_back("m2_kilo_time " + number(*s.m2_kilo_time));
    if (f.lambda < 1.0) {
        try {
            comments.push_back("growth_exponent " + number(growth_exponent(s)));
        } catch (const InputError& e) {
            log.info("growth exponent skipped: {}", e.what());
        }
    }
    {
        auto o = open_output(f.out, out);
        write_comments(o.stream, comments);
        write_moments_csv(o.stream, s);
    }
    if (!f.snapshots_out.empty()) {
        auto o = open_output(f.snapshots_out, out);
        write_comments(o.stream, comments);
        write_snapshot_csv(o.stream, s);
    }
    return kExitOk;
}

int cmd_collapse(const Flags& f, bool has_t_to, RunConfig& cfg, std::ostream& out,
                 spdlog::logger& log) {
    cfg.lambda = f.lambda;
    cfg.c = f.c;
    cfg.j_max = f.j_max;
    cfg.t_end = f.t_end;
    cfg.tol = f.tol;
    cfg.terms = f.terms;
    cfg.extra["kinetics_tol"] = f.kinetics_tol;
    cfg.extra["t_from"] = f.t_from;
    cfg.extra["x_lo"] = f.x_lo;
    cfg.extra["x_hi"] = f.x_hi;
    cfg.extra["xmax"] = f.collapse_xmax;

    const KineticsSeries s =
        simulate(f.lambda, f.j_max, f.t_end, kinetics_options(f, f.kinetics_tol, false, cfg));
    double t_to = f.t_to;
    if (has_t_to) {
        cfg.extra["t_to"] = f.t_to;
    } else {
        const std::size_t end = pre_truncation_end(s);
        if (end == 0) throw InputError("no snapshot precedes the truncation leak");
        t_to = s.snapshots[end - 1].t;
    }
    const ScalingProblem p = make_problem(f.lambda, f.c);
    const SampledSolution sol = march(p, series_for(p, f.terms), p.map().to_var(f.collapse_xmax), f.tol);
    const CollapseReport rep = collapse(s, sol, {f.t_from, t_to}, f.x_lo, f.x_hi);
    log.info("{} snapshots compared", rep.snapshots.size());

    json j = json_header(cfg);
    j["lambda"] = f.lambda;
    j["t_window"] = {f.t_from, t_to};
    json snaps = json::array();
    for (const auto& c : rep.snapshots) {
        snaps.push_back({{"t", c.t},
                         {"s", c.s},
                         {"amplitude", c.amplitude},
                         {"scale", c.scale},
                         {"fit_distance", c.fit_distance}});
    }
    j["snapshots"] = snaps;
    j["self_distance"] = rep.self_distance;
    bool decreasing = rep.snapshots.size() >= 4;
    for (std::size_t i = rep.snapshots.size() >= 4 ? rep.snapshots.size() - 3 : 0;
         decreasing && i < rep.snapshots.size(); ++i) {
        decreasing = rep.snapshots[i].fit_distance < rep.snapshots[i - 1].fit_distance;
    }
    j["fit_distance_decreasing_last3"] = decreasing;
    auto o = open_output(f.out, out);
    o.stream << j.dump() << '\n';
    return kExitOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    spdlog::logger log("aggscale", sink);
    log.set_pattern("[%l] %v");

    RunConfig cfg;
    try {
        log.set_level(log_level_from_env(cfg.log_level));
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }

    CLI::App app{"Scaling solutions of the diagonal-kernel coagulation equations", "aggscale"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Flags f;

    const auto out_flag = [&f](CLI::App* sub) {
        sub->add_option("--out", f.out, "Output file (default: standard output)");
    };
    const auto march_flags = [&f](CLI::App* sub) {
        sub->add_option("--tol", f.tol, "March tolerance")->capture_default_str();
        sub->add_option("--terms", f.terms, "Series terms N")->capture_default_str();
        sub->add_option("--rows", f.rows, "Rows in the exported table")->capture_default_str();
    };

    auto* delta = app.add_subcommand("delta", "Correction exponent Delta");
    delta->add_option("--lambda", f.lambda, "Homogeneity degree")->required();
    auto* delta_psi0 =
        delta->add_option("--psi0", f.psi0, "Solve the lambda = 1 exponent equation at this psi0");
    out_flag(delta);

    auto* series = app.add_subcommand("series", "Local series coefficients");
    series->add_option("--lambda", f.lambda, "Homogeneity degree")->required();
    series->add_option("--c", f.c, "Non-gelling family parameter")->capture_default_str();
    auto* series_tau = series->add_option("--tau", f.tau, "Gelling exponent");
    auto* series_a1 = series->add_option("--a1", f.a1, "Marginal first coefficient");
    series->add_option("--terms", f.terms, "Series terms N")->capture_default_str();
    out_flag(series);

    auto* nongel = app.add_subcommand("solve-nongel", "March the lambda < 1 solution");
    nongel->add_option("--lambda", f.lambda, "Homogeneity degree")->required();
    nongel->add_option("--c", f.c, "Family parameter")->capture_default_str();
    nongel->add_option("--xmax", f.nongel_xmax, "March up to this x")->capture_default_str();
    auto* nongel_handoff = nongel->add_option("--handoff", f.handoff, "Series handoff (in y)");
    march_flags(nongel);
    out_flag(nongel);

    auto* gel = app.add_subcommand("solve-gel", "March the lambda > 1 trajectory at a given tau");
    gel->add_option("--lambda", f.lambda, "Homogeneity degree")->required();
    gel->add_option("--tau", f.tau, "Small-size exponent")->required();
    gel->add_option("--zmax", f.gel_zmax, "March up to this zeta")->capture_default_str();
    auto* gel_handoff = gel->add_option("--handoff", f.handoff, "Series handoff (in zeta)");
    march_flags(gel);
    out_flag(gel);

    auto* marginal = app.add_subcommand("solve-marginal", "March the lambda = 1 solution");
    marginal->add_option("--a1", f.a1, "First series coefficient (<= 0)")->capture_default_str();
    marginal->add_option("--xmax", f.marginal_xmax, "March up to this x")->capture_default_str();
    auto* marginal_handoff = marginal->add_option("--handoff", f.handoff, "Series handoff (in x)");
    march_flags(marginal);
    out_flag(marginal);

    auto* ftau = app.add_subcommand("find-tau", "Bisect for the critical tau");
    ftau->add_option("--lambda", f.lambda, "Homogeneity degree (> 1)")->required();
    ftau->add_option("--tol-tau", f.tol_tau, "Final bracket width")->capture_default_str();
    ftau->add_option("--horizon", f.horizon, "Initial march horizon in zeta")->capture_default_str();
    ftau->add_option("--march-tol", f.march_tol, "March tolerance")->capture_default_str();
    ftau->add_option("--samples", f.samples, "Also export Phi at tau* on this many x points");
    ftau->add_option("--phi-out", f.phi_out, "File for the exported Phi table");
    out_flag(ftau);

    const auto kinetics_flags = [&f](CLI::App* sub) {
        sub->add_option("--lambda", f.lambda, "Homogeneity degree")->required();
        sub->add_option("--j-max", f.j_max, "Largest bin index")->capture_default_str();
        sub->add_option("--t-end", f.t_end, "Final time")->required();
        sub->add_option("--c0", f.c0, "Initial monomer concentration")->capture_default_str();
        sub->add_option("--t-first", f.t_first, "First snapshot time")->capture_default_str();
        sub->add_option("--snapshot-ratio", f.snapshot_ratio, "Snapshot time ratio")
            ->capture_default_str();
    };

    auto* sim = app.add_subcommand("simulate", "Integrate the dyadic kinetics");
    kinetics_flags(sim);
    sim->add_option("--tol", f.tol, "Integrator tolerance")->capture_default_str();
    auto* sim_stop =
        sim->add_option("--stop-leak", f.stop_leak, "Stop once this fraction of mass has leaked");
    sim->add_option("--snapshots", f.snapshots_out, "Long-format snapshot CSV file");
    out_flag(sim);

    auto* coll = app.add_subcommand("collapse", "Compare kinetics snapshots with the scaling function");
    kinetics_flags(coll);
    coll->add_option("--c", f.c, "Family parameter of the scaling solution")->capture_default_str();
    coll->add_option("--tol", f.tol, "March tolerance")->capture_default_str();
    coll->add_option("--terms", f.terms, "Series terms N")->capture_default_str();
    coll->add_option("--xmax", f.collapse_xmax, "March the scaling solution up to this x")
        ->capture_default_str();
    coll->add_option("--kinetics-tol", f.kinetics_tol, "Integrator tolerance")
        ->capture_default_str();
    coll->add_option("--t-from", f.t_from, "Window start")->capture_default_str();
    auto* coll_t_to = coll->add_option("--t-to", f.t_to, "Window end (default: last untruncated)");
    coll->add_option("--x-lo", f.x_lo, "Smallest rescaled size compared")->capture_default_str();
    coll->add_option("--x-hi", f.x_hi, "Largest rescaled size compared")->capture_default_str();
    out_flag(coll);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitInput;
    }

    const CLI::App* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();
    cfg.out = f.out;

    try {
        if (sub == delta) return cmd_delta(f, delta_psi0->count() > 0, cfg, out, log);
        if (sub == series) {
            return cmd_series(f, series_tau->count() > 0, series_a1->count() > 0, cfg, out, log);
        }
        if (sub == nongel) return cmd_solve_nongel(f, nongel_handoff->count() > 0, cfg, out, log);
        if (sub == gel) return cmd_solve_gel(f, gel_handoff->count() > 0, cfg, out, log);
        if (sub == marginal) {
            return cmd_solve_marginal(f, marginal_handoff->count() > 0, cfg, out, log);
        }
        if (sub == ftau) return cmd_find_tau(f, cfg, out, log);
        if (sub == sim) return cmd_simulate(f, sim_stop->count() > 0, cfg, out, log);
        if (sub == coll) return cmd_collapse(f, coll_t_to->count() > 0, cfg, out, log);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    err << "unknown subcommand\n";
    return kExitInput;
}

}  // namespace aggscale::cli
