#pragma once

#include "dgreen/dichotomy.hpp"
#include "dgreen/green.hpp"
#include "dgreen/io.hpp"
#include "dgreen/nonlinear.hpp"
#include "dgreen/operator_core.hpp"
#include "dgreen/oracle.hpp"
#include "dgreen/problem.hpp"
#include "dgreen/propagator.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dgreen {

enum class LogLevel { Quiet, Info, Debug };

/// DGREEN_LOG = quiet | info | debug (default quiet).
inline LogLevel log_level() {
    const char* v = std::getenv("DGREEN_LOG");
    if (!v) return LogLevel::Quiet;
    const std::string s(v);
    if (s == "debug" || s == "2") return LogLevel::Debug;
    if (s == "info" || s == "1") return LogLevel::Info;
    return LogLevel::Quiet;
}

inline void log(LogLevel level, const std::string& msg) {
    if (level <= log_level() && level != LogLevel::Quiet) std::cerr << "[dgreen] " << msg << '\n';
}

struct RunOptions {
    std::string out_dir;
    std::string format;
    std::optional<double> t_cut, step, eps;
    std::optional<int> max_iter;
    unsigned workers = 1;
};

struct Report {
    json doc = json::object();
    std::vector<std::string> lines;
    int exit_code = 0;

    void line(const std::string& s) { lines.push_back(s); }
};

inline const std::vector<std::string>& command_ids() {
    static const std::vector<std::string> ids{"check-dichotomy", "solvability", "solve-linear",
                                              "solve-nonlinear", "oracle-compare", "regime"};
    return ids;
}

/// Family, both dichotomies and the Green context for a problem.
struct LinearSetup {
    std::shared_ptr<const EvolutionFamily> family;
    HalfLineDichotomy plus, minus;
    std::shared_ptr<const GreenContext> ctx;
};

inline Operator initial_projector(const ProjectorSource& src, const Generator& gen, Side side) {
    if (src.kind == "explicit") return src.matrix;
    if (src.kind == "piecewise_spectral") return spectral_projector(gen(side == Side::Plus ? 1.0 : -1.0));
    return spectral_projector(gen(src.at));
}

inline std::shared_ptr<const EvolutionFamily> build_problem_family(const ProblemSpec& spec) {
    // Projector sweeps start at the far ends, so the family reaches well past t_cut.
    const double extent = 2.25 * spec.grid.t_cut;
    log(LogLevel::Debug, "evolution family on [-" + num(extent) + ", " + num(extent) + "], h = " + num(spec.grid.h));
    return std::make_shared<const EvolutionFamily>(spec.generator, -extent, extent, spec.grid.h);
}

inline LinearSetup build_linear(const ProblemSpec& spec) {
    LinearSetup s;
    s.family = build_problem_family(spec);
    s.plus = make_dichotomy(s.family, initial_projector(spec.plus, spec.generator, Side::Plus), Side::Plus);
    s.minus = make_dichotomy(s.family, initial_projector(spec.minus, spec.generator, Side::Minus), Side::Minus);
    QuadratureConfig q;
    q.t_cut = spec.grid.t_cut;
    q.nodes_per_unit = spec.grid.nodes_per_unit;
    q.tail_tol = spec.tol.tail_tol;
    s.ctx = std::make_shared<const GreenContext>(s.plus, s.minus, q, spec.tol.tol_rank);
    log(LogLevel::Info, "dichotomies: plus M=" + num(s.plus.M) + " alpha=" + num(s.plus.alpha) +
                            ", minus M=" + num(s.minus.M) + " alpha=" + num(s.minus.alpha));
    return s;
}

inline void apply_overrides(ProblemSpec& spec, const RunOptions& opt) {
    if (opt.t_cut) {
        if (!(*opt.t_cut > 0.0)) throw InputError("--t-cut must be positive");
        spec.grid.t_cut = *opt.t_cut;
    }
    if (opt.step) {
        if (!(*opt.step > 0.0)) throw InputError("--step must be positive");
        spec.grid.h = *opt.step;
    }
    if (!opt.out_dir.empty()) spec.out_dir = opt.out_dir;
    if (!opt.format.empty()) {
        if (opt.format != "csv" && opt.format != "json")
            throw InputError("unknown --format \"" + opt.format + "\"; valid: csv, json");
        spec.format = opt.format;
    }
    if (opt.eps || opt.max_iter) {
        if (!spec.nonlinear) throw InputError("--eps/--max-iter given but the problem has no nonlinearity");
        if (opt.eps) {
            if (*opt.eps < 0.0 || *opt.eps > spec.nonlinear->eps_max)
                throw InputError("--eps must lie in [0, " + num(spec.nonlinear->eps_max) + "]");
            spec.nonlinear->eps = *opt.eps;
        }
        if (opt.max_iter) {
            if (*opt.max_iter < 1) throw InputError("--max-iter must be >= 1");
            spec.nonlinear->max_iter = *opt.max_iter;
        }
    }
}

namespace detail {

inline std::vector<double> residual_sample(const GreenContext& ctx) {
    std::vector<double> out;
    for (double t : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0})
        if (t < ctx.t_cut() - 1.0) {
            out.push_back(-t);
            out.push_back(t);
        }
    return out;
}

inline std::string vec_str(const Vector& v) {
    std::string s = "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += num(v(i).real());
        if (v(i).imag() != 0.0) s += (v(i).imag() < 0 ? "-" : "+") + num(std::abs(v(i).imag())) + "i";
    }
    return s + ")";
}

inline std::string write_artifact(const ProblemSpec& spec, const std::string& stem, const Trajectory& tr) {
    if (spec.out_dir.empty()) return "";
    std::filesystem::create_directories(spec.out_dir);
    const std::string path = (std::filesystem::path(spec.out_dir) / (spec.name + "_" + stem + "." + spec.format)).string();
    write_trajectory(path, tr, spec.format);
    return path;
}

inline json dichotomy_json(const HalfLineDichotomy& d) {
    return json{{"side", to_string(d.side)}, {"M", d.M}, {"alpha", d.alpha}};
}

}  // namespace detail

inline Report run_check_dichotomy(const ProblemSpec& spec, Report rep) {
    const auto family = build_problem_family(spec);
    bool all_ok = true;
    json sides = json::array();
    for (Side side : {Side::Plus, Side::Minus}) {
        const ProjectorSource& src = side == Side::Plus ? spec.plus : spec.minus;
        const Operator p0 = initial_projector(src, spec.generator, side);
        const ProjectorField field(family, p0, side);
        const DichotomyReport r = verify_dichotomy(field, 21);
        all_ok = all_ok && r.ok;
        sides.push_back(json{{"side", to_string(side)}, {"ok", r.ok}, {"M", r.M_est}, {"alpha", r.alpha_est},
                             {"idempotency_err", r.idempotency_err}, {"invariance_err", r.invariance_err},
                             {"worst_pair", {r.worst_pair.first, r.worst_pair.second}}, {"reason", r.reason}});
        if (r.ok)
            rep.line(std::string(to_string(side)) + ": ok  M = " + num(r.M_est) + "  alpha = " + num(r.alpha_est));
        else
            rep.line(std::string(to_string(side)) + ": no dichotomy: " + r.reason);
    }
    rep.doc["dichotomy"] = sides;
    rep.exit_code = all_ok ? 0 : 2;
    return rep;
}

inline Report run_solvability(const ProblemSpec& spec, Report rep) {
    const LinearSetup s = build_linear(spec);
    const double tol = spec.tol.tol_solve + spec.tol.tail_tol;
    const SolvabilityResidual r = solvability_residual(s.ctx, spec.forcing, spec.tol.tol_solve);
    const Regime reg = regime_classify(s.ctx->pinv(), rhs_g(s.ctx, spec.forcing), tol, spec.tol.tol_margin);
    rep.doc["residual"] = to_json(r.r);
    rep.doc["residual_norm"] = r.norm;
    rep.doc["condition_satisfied"] = r.satisfied;
    rep.doc["verdict"] = r.satisfied ? "Classical" : "Pseudosolution";
    rep.doc["tail_bound"] = s.ctx->tail_bound(spec.forcing.sup_norm());
    rep.line("|r| = " + num(r.norm) + "  verdict: " + (r.satisfied ? "Classical" : "Pseudosolution"));
    rep.line("rank D = " + std::to_string(s.ctx->pinv().rank) + "  |P_N(D*) g| = " + num(reg.residual_norm));
    return rep;
}

inline Report run_regime(const ProblemSpec& spec, Report rep) {
    const LinearSetup s = build_linear(spec);
    const double tol = spec.tol.tol_solve + spec.tol.tail_tol;
    const Regime reg = regime_classify(s.ctx->pinv(), rhs_g(s.ctx, spec.forcing), tol, spec.tol.tol_margin);
    rep.doc["case"] = reg.case_number();
    rep.doc["tag"] = to_string(reg.tag);
    rep.doc["ill_posed_margin"] = reg.ill_posed_margin;
    rep.doc["margin"] = reg.margin;
    rep.doc["residual_norm"] = reg.residual_norm;
    rep.line("case " + std::to_string(reg.case_number()) + ": " + to_string(reg.tag) +
             (reg.ill_posed_margin ? " (IllPosedMargin)" : "") + "  margin = " + num(reg.margin) +
             "  |P_N(D*) g| = " + num(reg.residual_norm));
    return rep;
}

inline Report run_solve_linear(const ProblemSpec& spec, const RunOptions& opt, Report rep) {
    const LinearSetup s = build_linear(spec);
    const GreenSolution sol(s.ctx, spec.forcing);
    const JumpCheck jc = jump_check(sol);
    const std::vector<double> sample = detail::residual_sample(*s.ctx);
    const double dres = diff_residual(sol, sample, 1e-3, &spec.c);
    const double tol = spec.tol.tol_solve + spec.tol.tail_tol;
    const bool classical = sol.residual().norm <= tol;

    Trajectory tr = sample_trajectory(sol, spec.c, grid_times(*s.ctx), opt.workers);
    tr.meta.problem_hash = spec.hash;
    tr.meta.regime = classical ? "Classical" : "Pseudosolution";
    tr.meta.residual_norm = sol.residual().norm;
    tr.meta.tolerances = spec.tol.as_map();
    const double bound = green_bound(*s.ctx, spec.forcing.sup_norm());
    const std::string path = detail::write_artifact(spec, "linear", tr);

    rep.doc["dichotomies"] = {detail::dichotomy_json(s.plus), detail::dichotomy_json(s.minus)};
    rep.doc["jump"] = to_json(jc.jump);
    rep.doc["jump_err"] = jc.err;
    rep.doc["diff_residual"] = dres;
    rep.doc["regime"] = tr.meta.regime;
    rep.doc["residual_norm"] = sol.residual().norm;
    rep.doc["max_norm"] = tr.max_norm();
    rep.doc["green_bound"] = bound;
    rep.doc["tail_bound"] = s.ctx->tail_bound(spec.forcing.sup_norm());
    if (!path.empty()) rep.doc["trajectory"] = path;
    rep.line("jump err = " + num(jc.err) + "  |jump| = " + num(jc.jump.norm()));
    rep.line("diff residual = " + num(dres) + " (h = 1e-3)");
    rep.line("regime: " + tr.meta.regime + "  |r| = " + num(sol.residual().norm));
    rep.line("max |x| = " + num(tr.max_norm()) + "  (G bound " + num(bound) + ")");
    if (!path.empty()) rep.line("trajectory: " + path);
    return rep;
}

inline Report run_solve_nonlinear(const ProblemSpec& spec, const RunOptions& opt, Report rep) {
    if (!spec.nonlinear) throw InputError("solve-nonlinear: the problem has no \"nonlinearity\" section");
    const NonlinearSpec& nl = *spec.nonlinear;
    const LinearSetup s = build_linear(spec);
    const GeneratingSystem sys(s.ctx, nl.Z, spec.forcing);

    NewtonConfig nc;
    nc.tol_root = spec.tol.tol_root;
    nc.tol_rank = spec.tol.tol_rank;
    nc.tol_suff = spec.tol.tol_suff;
    const GeneratingRoot root = solve_generating(sys, nl.c_init, nc);
    rep.doc["root"] = json{{"c0", to_json(root.c0)},
                           {"F_norm", root.F_norm_at_root},
                           {"B0", to_json(root.B0)},
                           {"B0_rank", root.B0_rank},
                           {"sufficient_ok", root.sufficient_ok},
                           {"sufficient_value", root.sufficient_value},
                           {"frechet_match_err", root.frechet_match_err},
                           {"F_identically_zero", root.F_identically_zero}};
    rep.line("c0 = " + detail::vec_str(root.c0) + "  |F(c0)| = " + num(root.F_norm_at_root) +
             (root.F_identically_zero ? "  (F identically zero on kernel)" : ""));
    rep.line("B0 rank " + std::to_string(root.B0_rank) + "  sufficient: " + (root.sufficient_ok ? "yes" : "no") +
             "  |B0 - F'(c0)| = " + num(root.frechet_match_err));

    IterationConfig ic;
    ic.eps = nl.eps;
    ic.eps_max = nl.eps_max;
    ic.max_iter = nl.max_iter;
    ic.tol_fix = spec.tol.tol_fix;
    ic.tol_jump = spec.tol.tol_jump;
    ic.tol_rank = spec.tol.tol_rank;
    ic.scheme = nl.scheme == "updated" ? IterationScheme::Updated : IterationScheme::Lagged;
    ic.workers = opt.workers;
    IterationResult res = iterate_solution(sys, root, ic);

    json hist = json::array();
    for (const auto& st : res.history) {
        hist.push_back(json{{"k", st.k}, {"correction_norm", st.correction_norm}, {"c_k", to_json(st.c_k)}});
        log(LogLevel::Debug, "k = " + std::to_string(st.k) + "  |dy| = " + num(st.correction_norm));
    }
    const std::vector<double> sample = detail::residual_sample(*s.ctx);
    const double ores = ode_residual(sys, res, sample, 1e-3);
    res.trajectory.meta.problem_hash = spec.hash;
    res.trajectory.meta.tolerances = spec.tol.as_map();
    const std::string path = detail::write_artifact(spec, "nonlinear", res.trajectory);

    rep.doc["eps"] = nl.eps;
    rep.doc["history"] = hist;
    rep.doc["asymptotic_ratio"] = res.asymptotic_ratio;
    rep.doc["solvability_norm"] = res.solvability_norm;
    rep.doc["ode_residual"] = ores;
    if (!path.empty()) rep.doc["trajectory"] = path;
    rep.line("eps = " + num(nl.eps) + ": converged in " + std::to_string(res.iterations()) + " steps, ratio " +
             num(res.asymptotic_ratio));
    for (const auto& st : res.history)
        rep.line("  k = " + std::to_string(st.k) + "  |y_k+1 - y_k| = " + num(st.correction_norm));
    rep.line("ODE residual = " + num(ores) + "  solvability = " + num(res.solvability_norm));
    if (!path.empty()) rep.line("trajectory: " + path);
    return rep;
}

inline Report run_oracle_compare(const ProblemSpec& spec, Report rep) {
    const LinearSetup s = build_linear(spec);
    const GreenSolution sol(s.ctx, spec.forcing);
    const double h = spec.grid.h;
    const double T = h * std::floor(0.75 * spec.grid.t_cut / h + 1e-9);
    std::optional<Vector> pin;
    if (s.ctx->pinv().rank < spec.n) pin = bounded_family(sol, spec.c, 0.0);
    const BvpResult bvp = bvp_solve(*s.family, s.plus, s.minus, spec.forcing, T, h, pin, spec.tol.tol_rank);
    const Trajectory green = sample_trajectory(sol, spec.c, bvp.trajectory.times);
    const double w = 0.5 * spec.grid.t_cut;
    const CompareResult cr = compare(green, bvp.trajectory, -w, w);
    rep.doc["max_err"] = cr.max_err;
    rep.doc["at_t"] = cr.at_t;
    rep.doc["window"] = {-w, w};
    rep.doc["bvp"] = json{{"T", T}, {"h", h}, {"boundary_residual", bvp.boundary_residual},
                          {"consistency_residual", bvp.consistency_residual},
                          {"condition_number", bvp.condition_number}};
    rep.doc["residual_norm"] = sol.residual().norm;
    rep.line("max |G - BVP| on [-" + num(w) + ", " + num(w) + "] = " + num(cr.max_err) + " at t = " + num(cr.at_t));
    rep.line("BVP: T = " + num(T) + "  consistency = " + num(bvp.consistency_residual) +
             "  boundary = " + num(bvp.boundary_residual) + "  cond ~ " + num(bvp.condition_number));
    if (sol.residual().norm > spec.tol.tol_solve + spec.tol.tail_tol)
        rep.line("note: solvability fails (|r| = " + num(sol.residual().norm) + "); no bounded solution to compare");
    return rep;
}

/// Runs one command; math failures surface as MathError, bad input as InputError.
inline Report run(const std::string& command, ProblemSpec spec, const RunOptions& opt = {}) {
    const auto& ids = command_ids();
    if (std::find(ids.begin(), ids.end(), command) == ids.end())
        throw InputError("unknown command \"" + command + "\"; valid: " + detail::join(ids));
    apply_overrides(spec, opt);
    Report rep;
    rep.doc["command"] = command;
    rep.doc["problem"] = spec.name;
    rep.doc["problem_hash"] = spec.hash;
    json tol = json::object();
    for (const auto& [k, v] : spec.tol.as_map()) tol[k] = v;
    rep.doc["tolerances"] = tol;
    rep.doc["grid"] = json{{"t_cut", spec.grid.t_cut}, {"h", spec.grid.h}, {"nodes_per_unit", spec.grid.nodes_per_unit}};
    rep.line(command + " " + spec.name + "  [hash " + spec.hash + "]");
    std::string tl = "tolerances:";
    for (const auto& [k, v] : spec.tol.as_map()) tl += " " + k + "=" + num(v);
    rep.line(tl);
    log(LogLevel::Info, "running " + command + " on " + spec.name);

    if (command == "check-dichotomy") return run_check_dichotomy(spec, std::move(rep));
    if (command == "solvability") return run_solvability(spec, std::move(rep));
    if (command == "regime") return run_regime(spec, std::move(rep));
    if (command == "solve-linear") return run_solve_linear(spec, opt, std::move(rep));
    if (command == "solve-nonlinear") return run_solve_nonlinear(spec, opt, std::move(rep));
    return run_oracle_compare(spec, std::move(rep));
}

}  // namespace dgreen
