#include "stabkit/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "stabkit/control.hpp"
#include "stabkit/equilibria.hpp"
#include "stabkit/expr.hpp"
#include "stabkit/stability.hpp"

namespace stabkit {

namespace {

ComponentSet present_subset(const SystemBundle& b, ComponentSet s) {
    ComponentSet out;
    out.f = s.f && b.has(Component::F);
    out.f_incr = s.f_incr && b.has(Component::FIncr);
    out.g = s.g && b.has(Component::G);
    out.g_incr = s.g_incr && b.has(Component::GIncr);
    return out;
}

/// The distinct nonempty subsystems the four variants select from this
/// bundle, in variant order.
std::vector<ComponentSet> distinct_variant_sets(const SystemBundle& b) {
    std::vector<ComponentSet> out;
    for (Variant v : {Variant::Nominal, Variant::Perturbed, Variant::Controlled,
                      Variant::ControlledPerturbed}) {
        ComponentSet s = present_subset(b, components_of(v));
        if (!s.f && !s.f_incr && !s.g && !s.g_incr) continue;
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
    return out;
}

EstimatePattern pattern_from_name(const std::string& name) {
    if (name == "incremental") return EstimatePattern::nominal_to_perturbed();
    if (name == "control") return EstimatePattern::nominal_to_controlled();
    if (name == "incrementalControl") return EstimatePattern::nominal_to_controlled_perturbed();
    if (name == "completion") return EstimatePattern::incremental_completion();
    throw ConfigError("unknown estimate pattern: " + name);
}

EstimatePattern auto_pattern(const SystemBundle& b) {
    const bool fi = b.has(Component::FIncr);
    const bool g = b.has(Component::G);
    const bool gi = b.has(Component::GIncr);
    if (fi && g && gi) return EstimatePattern::incremental_completion();
    if (fi && g) return EstimatePattern::nominal_to_controlled_perturbed();
    if (fi) return EstimatePattern::nominal_to_perturbed();
    if (g) return EstimatePattern::nominal_to_controlled();
    throw ConfigError(
        "estimate needs a perturbing component beyond f; configure f_incr or g, or drop the "
        "estimate stage");
}

double nearest_root(const std::vector<EquilibriumPoint>& roots, double target) {
    double best = roots.front().x;
    for (const auto& r : roots) {
        if (std::fabs(r.x - target) < std::fabs(best - target)) best = r.x;
    }
    return best;
}

struct ScheduleBuild {
    GainSchedule schedule;
    std::optional<EquilibriumResolution> resolution;
    bool target_fixed = false;  // x_bar_target came from the config
};

ScheduleBuild build_schedule(const AnalysisConfig& cfg, const SystemBundle& b) {
    const ControlConfig& cc = *cfg.control;

    double x_open = 0.0;
    if (cc.x_bar_open) {
        x_open = *cc.x_bar_open;
    } else {
        ComponentSet open_set = present_subset(b, components_of(Variant::Perturbed));
        auto roots = find_equilibria(b, open_set, cfg.solver);
        if (roots.empty()) {
            throw ConfigError(
                "no open-loop equilibrium found in the scan interval; set [control] x_bar_open "
                "explicitly");
        }
        double near = cfg.region && !cfg.region->center.empty() ? cfg.region->center[0] : 0.0;
        x_open = nearest_root(roots, near);
    }

    auto make = [&](double x_closed) {
        if (cc.mode == ControlMode::Combined) {
            return synthesize_combined(b, x_open, x_closed, cc.sigma, cc.sigma_tilde, cc.gamma,
                                       cc.denom_tol);
        }
        return synthesize_nominal_only(b, x_open, x_closed, cc.sigma, cc.gamma, cc.a, cc.b,
                                       cc.denom_tol);
    };

    ScheduleBuild out;
    if (cc.x_bar_target) {
        out.schedule = make(*cc.x_bar_target);
        out.target_fixed = true;
    } else {
        out.resolution = resolve_closed_equilibrium(b, make(x_open), cfg.solver);
        out.schedule = out.resolution->schedule;
    }
    return out;
}

Json side_json(const SideVerdict& side) { return to_json(side); }

bool distinct_start(std::span<const double> sample, double x_bar) {
    for (double v : sample) {
        if (v != x_bar) return true;
    }
    return false;
}

SideVerdict certify_set(const SystemBundle& b, ComponentSet set, double x_bar,
                        const RegionSpec& S) {
    SideVerdict side;
    side.certificate = growth_certificate(b, set, x_bar, S);
    int m = S.dimension();
    VectorMap map = associate_map(b, set, m);
    side.invariance = check_invariance(map, S);
    side.verdict = side_verdict(side.certificate, side.invariance);
    std::vector<double> x_bar_vec(static_cast<std::size_t>(m), x_bar);
    auto samples = sample_region(S);
    for (std::size_t i = 0; i < samples.size() && side.traces.size() < 4; ++i) {
        if (!distinct_start(samples[i], x_bar)) continue;
        side.traces.push_back(contraction_trace(map, x_bar_vec, samples[i], 32));
    }
    return side;
}

SideVerdict certify_loop(const ClosedLoop& loop, double x_bar, const RegionSpec& S) {
    ScalarSystem sys = loop.as_scalar_system();
    SideVerdict side;
    side.certificate = growth_certificate(sys, x_bar, S, {}, "closedLoop");
    side.invariance = check_invariance(sys, S);
    side.verdict = side_verdict(side.certificate, side.invariance);
    std::vector<double> x_bar_vec(static_cast<std::size_t>(S.dimension()), x_bar);
    auto samples = sample_region(S);
    for (std::size_t i = 0; i < samples.size() && side.traces.size() < 4; ++i) {
        if (!distinct_start(samples[i], x_bar)) continue;
        side.traces.push_back(contraction_trace(sys, x_bar_vec, samples[i], 32));
    }
    return side;
}

struct Pipeline {
    const AnalysisConfig& cfg;
    SystemBundle bundle;
    std::optional<std::uint64_t> seed_override;
    Json report = Json::object();
    std::vector<std::pair<std::string, Verdict>> verdicts;
    std::optional<ScheduleBuild> schedule_build;

    void note_verdict(const std::string& label, Verdict v) {
        verdicts.emplace_back(label, v);
    }

    const ScheduleBuild& schedule() {
        if (!cfg.control) throw ConfigError("this analysis needs a [control] section");
        if (!schedule_build) schedule_build = build_schedule(cfg, bundle);
        return *schedule_build;
    }

    void run_equilibria() {
        Json table = Json::object();
        for (ComponentSet set : distinct_variant_sets(bundle)) {
            Json rows = Json::array();
            for (const auto& p : find_equilibria(bundle, set, cfg.solver)) {
                rows.push_back(to_json(p));
            }
            table[set_label(set)] = rows;
        }
        report["equilibria"] = table;
    }

    void run_estimate() {
        EstimatePattern pattern =
            cfg.pattern ? pattern_from_name(*cfg.pattern) : auto_pattern(bundle);
        // an explicit pattern must talk about components the system actually has
        ComponentSet wanted{pattern.base.f || pattern.perturbing.f,
                            pattern.base.f_incr || pattern.perturbing.f_incr,
                            pattern.base.g || pattern.perturbing.g,
                            pattern.base.g_incr || pattern.perturbing.g_incr};
        if (!(present_subset(bundle, wanted) == wanted)) {
            throw ConfigError("the estimate pattern '" + cfg.pattern.value_or("auto") +
                              "' names components the [system] section does not configure");
        }
        validate_pattern(bundle, pattern);
        Json rows = Json::array();
        for (const auto& base : find_equilibria(bundle, pattern.base, cfg.solver)) {
            Json row = to_json(linear_estimate(bundle, pattern, base.x, cfg.rank_tol, cfg.fd));
            row["xBase"] = base.x;
            rows.push_back(row);
        }
        report["estimates"] = rows;
    }

    void run_certify() {
        Json rows = Json::array();
        for (ComponentSet set : distinct_variant_sets(bundle)) {
            std::string label = set_label(set);
            int m = std::max(1, bundle.order(set));
            RegionSpec S = cfg.region_for(m, seed_override);
            Json row{{"label", label}, {"order", m}};
            auto roots = find_equilibria(bundle, set, cfg.solver);
            if (roots.empty()) {
                row["xBar"] = Json();
                row["note"] = "no equilibrium found in the scan interval";
                row["verdict"] = verdict_name(Verdict::Inconclusive);
                note_verdict(label, Verdict::Inconclusive);
                rows.push_back(row);
                continue;
            }
            double x_bar = nearest_root(roots, S.center[0]);
            SideVerdict side = certify_set(bundle, set, x_bar, S);
            row["xBar"] = x_bar;
            row["side"] = side_json(side);
            row["verdict"] = verdict_name(side.verdict);
            note_verdict(label, side.verdict);
            rows.push_back(row);
        }
        report["certificates"] = rows;
    }

    void run_synthesize() {
        const ScheduleBuild& sb = schedule();
        Json section{{"schedule", to_json(sb.schedule)}, {"targetFixed", sb.target_fixed}};
        section["resolution"] = sb.resolution ? to_json(*sb.resolution) : Json();

        if (cfg.region) {
            ClosedLoop loop(bundle, sb.schedule);

            RegionSpec S_loop = cfg.region_for(loop.window_size(), seed_override);
            SideVerdict closed = certify_loop(loop, sb.schedule.x_bar_target, S_loop);
            section["closedLoop"] = side_json(closed);
            note_verdict("closedLoop", closed.verdict);

            ComponentSet open_set = present_subset(bundle, components_of(Variant::Perturbed));
            int m_open = std::max(1, bundle.order(open_set));
            RegionSpec S_open = cfg.region_for(m_open, seed_override);
            SideVerdict open = certify_set(bundle, open_set, sb.schedule.x_bar_open, S_open);
            section["openLoop"] = side_json(open);
            note_verdict("openLoop", open.verdict);

            if (sb.schedule.mode == ControlMode::NominalOnly &&
                bundle.has(Component::FIncr)) {
                section["smallness"] = to_json(verify_smallness(
                    bundle, sb.schedule.x_bar_target, sb.schedule.x_bar_open, S_open,
                    sb.schedule.a, sb.schedule.b, closed.certificate.beta,
                    open.certificate.alpha));
            }
            if (sb.schedule.mode == ControlMode::Combined) {
                RegionSpec S_shift = S_open;
                S_shift.reference.assign(static_cast<std::size_t>(m_open),
                                         sb.schedule.x_bar_open);
                double shift = sb.schedule.x_bar_target - sb.schedule.x_bar_open;
                section["shiftBound"] =
                    to_json(verify_shift_bound(shift, open.certificate.alpha,
                                               closed.certificate.beta, S_shift,
                                               S_shift.effective_r_excl()));
            }
        }
        report["synthesis"] = section;
    }

    void run_simulate() {
        if (!cfg.run) throw ConfigError("this analysis needs a [run] section");
        const RunConfig& rc = *cfg.run;
        Json section = Json::object();

        if (cfg.control) {
            const ScheduleBuild& sb = schedule();
            ClosedLoop loop(bundle, sb.schedule);
            if (static_cast<int>(rc.history.size()) < loop.window_size()) {
                throw ConfigError("[run] history needs at least " +
                                  std::to_string(loop.window_size()) +
                                  " values for the closed-loop window");
            }
            SimulationResult sim = simulate(loop, rc.history, rc.steps);
            GainAudit audit = audit_gains(loop, sim.steps);
            section["kind"] = "closedLoop";
            section["schedule"] = to_json(sb.schedule);
            section["values"] = Json(sim.values);
            section["truncated"] = sim.truncated;
            section["truncationReason"] = sim.truncation_reason;
            section["audit"] = to_json(audit);
            section["csv"] = gains_csv(sim);
        } else {
            ComponentSet set = present_subset(
                bundle, ComponentSet{true, true, true, true});
            int m = std::max(1, bundle.order(set));
            if (static_cast<int>(rc.history.size()) < m) {
                throw ConfigError("[run] history needs at least " + std::to_string(m) +
                                  " values for a system of order " + std::to_string(m));
            }
            ScalarRun run = scalar_run(bundle, set, rc.history, rc.steps);
            section["kind"] = "openLoop";
            section["set"] = set_label(set);
            section["values"] = Json(run.values);
            section["truncated"] = run.truncated;
            section["truncationReason"] = run.truncation_reason;
            section["csv"] = trajectory_csv(run.values);

            if (rc.max_period) {
                section["oscillation"] = Json();
                if (!run.truncated) {
                    int tail = rc.tail_window > 0 ? rc.tail_window : 2 * *rc.max_period;
                    if (tail < 2 * *rc.max_period) {
                        throw ConfigError("[run] tail_window must be at least twice max_period");
                    }
                    if (rc.steps + 1 < tail + *rc.max_period) {
                        throw ConfigError("[run] steps must be at least tail_window + max_period "
                                          "for oscillation detection");
                    }
                    VectorMap map = associate_map(bundle, set, m);
                    Trajectory traj =
                        iterate(map, std::span<const double>(rc.history).first(m), rc.steps);
                    auto osc = detect_oscillation(map, traj, *rc.max_period, tail, rc.osc_tol);
                    if (osc) section["oscillation"] = to_json(*osc);
                }
            }
        }
        report["simulation"] = section;
    }
};

}  // namespace

RunOutcome run_analysis(const AnalysisConfig& cfg, const std::string& subcommand,
                        const std::string& out_dir,
                        std::optional<std::uint64_t> seed_override) {
    Pipeline p{cfg, cfg.make_bundle(), seed_override, Json::object(), {}, {}};

    std::uint64_t seed = seed_override ? *seed_override
                                       : (cfg.region ? cfg.region->rng_seed : 0);
    p.report["meta"] =
        Json{{"schema", 1}, {"subcommand", subcommand}, {"seed", seed}};
    Json raw = Json::object();
    for (const auto& [section, keys] : cfg.raw.sections) {
        Json sec = Json::object();
        for (const auto& [key, value] : keys) sec[key] = value;
        raw[section] = sec;
    }
    p.report["config"] = raw;

    if (subcommand == "equilibria") {
        p.run_equilibria();
    } else if (subcommand == "estimate") {
        p.run_estimate();
    } else if (subcommand == "certify") {
        p.run_certify();
    } else if (subcommand == "synthesize") {
        p.run_synthesize();
    } else if (subcommand == "simulate") {
        p.run_simulate();
    } else if (subcommand == "full") {
        p.run_equilibria();
        bool perturbing = p.bundle.has(Component::FIncr) || p.bundle.has(Component::G);
        if (perturbing) p.run_estimate();
        if (cfg.region) p.run_certify();
        if (cfg.control) p.run_synthesize();
        if (cfg.run) p.run_simulate();
    } else {
        throw ConfigError("unknown subcommand: " + subcommand);
    }

    Json verdicts = Json::array();
    bool inconclusive = false;
    for (const auto& [label, v] : p.verdicts) {
        verdicts.push_back(Json{{"label", label}, {"verdict", verdict_name(v)}});
        if (v == Verdict::Inconclusive) inconclusive = true;
    }
    p.report["verdicts"] = verdicts;

    RunOutcome out;
    out.report = std::move(p.report);
    out.exit_code = inconclusive ? 2 : 0;

    std::filesystem::create_directories(out_dir);
    // the CSV is carried in the report until here so two runs compare it too;
    // on disk it lives in its own file
    if (out.report.contains("simulation")) {
        std::string csv = out.report["simulation"]["csv"].get<std::string>();
        std::string csv_path =
            (std::filesystem::path(out_dir) / cfg.output.trajectory_csv).string();
        write_text_file(csv_path, csv);
        out.files.push_back(csv_path);
    }
    std::string report_path = (std::filesystem::path(out_dir) / cfg.output.report).string();
    write_text_file(report_path, out.report.dump(2) + "\n");
    out.files.push_back(report_path);
    return out;
}

std::string summarize(const Json& report) {
    std::string out;
    auto line = [&out](const std::string& s) {
        out += s;
        out += '\n';
    };
    if (report.contains("equilibria")) {
        for (const auto& [label, rows] : report["equilibria"].items()) {
            std::string xs;
            for (const auto& row : rows) {
                if (!xs.empty()) xs += ", ";
                xs += format_double(row["x"].get<double>());
            }
            line("equilibria[" + label + "]: " + (xs.empty() ? "none found" : xs));
        }
    }
    if (report.contains("estimates")) {
        for (const auto& row : report["estimates"]) {
            std::string head = "estimate at x=" + format_double(row["xBase"].get<double>()) +
                               ": " + row["classification"].get<std::string>();
            if (!row["estimate"].is_null()) {
                head += ", leading coordinate " +
                        format_double(row["estimate"][0].get<double>());
            }
            line(head);
        }
    }
    if (report.contains("certificates")) {
        for (const auto& row : report["certificates"]) {
            std::string head = "certify[" + row["label"].get<std::string>() + "]: " +
                               row["verdict"].get<std::string>();
            if (row.contains("side")) {
                const auto& cert = row["side"]["certificate"];
                head += " (alpha=" + format_double(cert["alpha"].get<double>()) +
                        ", beta=" + format_double(cert["beta"].get<double>()) + ")";
            }
            line(head);
        }
    }
    if (report.contains("synthesis")) {
        const auto& syn = report["synthesis"];
        const auto& sched = syn["schedule"];
        line("schedule: mode=" + sched["mode"].get<std::string>() +
             ", gamma=" + format_double(sched["gamma"].get<double>()) +
             ", target=" + format_double(sched["xBarTarget"].get<double>()));
        for (const char* side : {"openLoop", "closedLoop"}) {
            if (!syn.contains(side)) continue;
            const auto& cert = syn[side]["certificate"];
            line(std::string(side) + ": " + syn[side]["verdict"].get<std::string>() +
                 " (alpha=" + format_double(cert["alpha"].get<double>()) +
                 ", beta=" + format_double(cert["beta"].get<double>()) + ")");
        }
        if (syn.contains("smallness")) {
            line(std::string("smallness: ") +
                 (syn["smallness"]["admissible"].get<bool>() ? "admissible" : "not admissible"));
        }
        if (syn.contains("shiftBound")) {
            line(std::string("shift bound: ") +
                 (syn["shiftBound"]["ok"].get<bool>() ? "ok" : "violated") +
                 " (threshold " + format_double(syn["shiftBound"]["threshold"].get<double>()) +
                 ")");
        }
    }
    if (report.contains("simulation")) {
        const auto& sim = report["simulation"];
        std::string head = "simulation (" + sim["kind"].get<std::string>() + "): " +
                           std::to_string(sim["values"].size()) + " steps";
        if (sim["truncated"].get<bool>()) {
            head += ", truncated: " + sim["truncationReason"].get<std::string>();
        }
        if (sim.contains("oscillation") && !sim["oscillation"].is_null()) {
            head += ", period " + std::to_string(sim["oscillation"]["period"].get<int>());
        }
        line(head);
    }
    if (report.contains("verdicts")) {
        for (const auto& v : report["verdicts"]) {
            line("verdict[" + v["label"].get<std::string>() + "]: " +
                 v["verdict"].get<std::string>());
        }
    }
    return out;
}

}  // namespace stabkit
