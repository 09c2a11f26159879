#include "stabkit/report.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "stabkit/expr.hpp"

namespace stabkit {

namespace {

Json vec_json(std::span<const double> v) {
    Json out = Json::array();
    for (double x : v) out.push_back(x);
    return out;
}

Json vec_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Json matrix_json(const Eigen::MatrixXd& m) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

Json witness_json(const RatioWitness& w) {
    return Json{{"state", vec_json(w.state)}, {"image", w.image}, {"ratio", w.ratio}};
}

Json pattern_json(const EstimatePattern& p) {
    return Json{{"base", set_label(p.base)}, {"perturbing", set_label(p.perturbing)}};
}

}  // namespace

Json to_json(const EquilibriumPoint& p) {
    return Json{{"x", p.x}, {"set", set_label(p.set)}, {"residual", p.residual}};
}

Json to_json(const LinearEstimate& e) {
    Json out{
        {"pattern", pattern_json(e.pattern)},
        {"base", vec_json(e.base)},
        {"companion", matrix_json(e.companion)},
        {"residualVector", vec_json(e.residual_vector)},
        {"classification", estimate_class_name(e.classification)},
        {"mNormInf", e.m_norm_inf},
        {"rankTolUsed", e.rank_tol_used},
        {"rank", e.rank},
        {"rankAugmented", e.rank_augmented},
    };
    out["estimate"] = e.estimate ? vec_json(*e.estimate) : Json();
    out["contractionBound"] = e.contraction_bound ? Json(*e.contraction_bound) : Json();
    return out;
}

Json to_json(const GrowthCertificate& c) {
    Json out{
        {"set", set_label(c.set)},
        {"label", c.label},
        {"equilibrium", vec_json(c.equilibrium)},
        {"alpha", c.alpha},
        {"beta", c.beta},
        {"argmin", witness_json(c.argmin)},
        {"argmax", witness_json(c.argmax)},
        {"sampleTotal", c.sample_total},
        {"skipped", c.skipped},
    };
    out["alphaInflated"] = c.alpha_inflated ? Json(*c.alpha_inflated) : Json();
    out["betaInflated"] = c.beta_inflated ? Json(*c.beta_inflated) : Json();
    out["inflationValid"] = c.inflation_valid;
    out["inflationNote"] = c.inflation_note;
    return out;
}

Json to_json(const InvarianceResult& r) {
    Json out{{"pass", r.pass}, {"checked", r.checked}};
    if (r.witness) {
        out["witness"] =
            Json{{"state", vec_json(r.witness->state)}, {"image", vec_json(r.witness->image)}};
    } else {
        out["witness"] = Json();
    }
    return out;
}

Json to_json(const ContractionTrace& t) {
    return Json{
        {"ratios", vec_json(t.ratios)},       {"fittedRate", t.fitted_rate},
        {"expanding", t.expanding},           {"truncated", t.truncated},
        {"truncationReason", t.truncation_reason},
    };
}

Json to_json(const SideVerdict& v) {
    Json traces = Json::array();
    for (const auto& t : v.traces) traces.push_back(to_json(t));
    return Json{
        {"verdict", verdict_name(v.verdict)},
        {"certificate", to_json(v.certificate)},
        {"invariance", to_json(v.invariance)},
        {"traces", traces},
    };
}

Json to_json(const GainSchedule& s) {
    return Json{
        {"mode", control_mode_name(s.mode)},
        {"sigma", s.sigma},
        {"sigmaTilde", s.sigma_tilde},
        {"gamma", s.gamma},
        {"denomTol", s.denom_tol},
        {"xBarOpen", s.x_bar_open},
        {"xBarTarget", s.x_bar_target},
        {"a", s.a},
        {"b", s.b},
    };
}

Json to_json(const GainAudit& a) {
    return Json{
        {"replayed", a.replayed},
        {"replayMismatches", a.replay_mismatches},
        {"signViolations", a.sign_violations},
        {"magnitudeViolations", a.magnitude_violations},
    };
}

Json to_json(const EquilibriumResolution& r) {
    return Json{
        {"schedule", to_json(r.schedule)}, {"xBar", r.x_bar},       {"rounds", r.rounds},
        {"converged", r.converged},        {"residual", r.residual},
    };
}

Json to_json(const SmallnessReport& r) {
    return Json{
        {"betaTildeMin", r.beta_tilde_min},  {"alphaTildeMin", r.alpha_tilde_min},
        {"admissible", r.admissible},        {"betaSamples", r.beta_samples},
        {"alphaSamples", r.alpha_samples},
    };
}

Json to_json(const ShiftBoundReport& r) {
    return Json{
        {"ok", r.ok},
        {"threshold", r.threshold},
        {"margin", r.margin},
        {"minDistance", r.min_distance},
        {"strictForcesZero", r.strict_forces_zero},
        {"note", r.note},
    };
}

Json to_json(const OscillationPattern& p) {
    return Json{
        {"period", p.period},
        {"values", vec_json(p.values)},
        {"replayDeviation", p.replay_deviation},
        {"isEquilibrium", p.is_equilibrium()},
    };
}

std::string trajectory_csv(const std::vector<double>& values) {
    std::string out = "n,x_n\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',';
        out += format_double(values[i]);
        out += '\n';
    }
    return out;
}

std::string gains_csv(const SimulationResult& sim) {
    std::string out = "n,x_n,lambda,lambda_tilde,bound\n";
    for (std::size_t i = 0; i < sim.values.size(); ++i) {
        const GainStep& gs = sim.steps[i];
        out += std::to_string(gs.n);
        out += ',';
        out += format_double(sim.values[i]);
        out += ',';
        out += format_double(gs.lambda);
        out += ',';
        out += format_double(gs.lambda_tilde);
        out += ',';
        out += format_double(gs.degenerate ? 0.0 : gs.magnitude_target);
        out += '\n';
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

void diff_walk(const Json& a, const Json& b, const std::string& path, double tol,
               std::vector<Discrepancy>& out) {
    const bool a_num = a.is_number();
    const bool b_num = b.is_number();
    if (a_num && b_num) {
        double da = a.get<double>();
        double db = b.get<double>();
        double delta = std::fabs(da - db);
        bool equal = (da == db) || delta <= tol;
        if (std::isnan(da) && std::isnan(db)) equal = true;
        if (!equal) out.push_back({path, a, b, delta});
        return;
    }
    if (a.type() != b.type()) {
        throw std::runtime_error("schema mismatch at " + path + ": " +
                                 std::string(a.type_name()) + " vs " +
                                 std::string(b.type_name()));
    }
    if (a.is_object()) {
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (!b.contains(it.key())) {
                throw std::runtime_error("schema mismatch at " + path + ": missing key " +
                                         it.key());
            }
        }
        for (auto it = b.begin(); it != b.end(); ++it) {
            if (!a.contains(it.key())) {
                throw std::runtime_error("schema mismatch at " + path + ": extra key " + it.key());
            }
        }
        for (auto it = a.begin(); it != a.end(); ++it) {
            diff_walk(it.value(), b.at(it.key()), path + "." + it.key(), tol, out);
        }
        return;
    }
    if (a.is_array()) {
        // lengths are data (sampled evidence can truncate at different
        // steps), so a mismatch is a discrepancy and the shared prefix is
        // still compared
        if (a.size() != b.size()) {
            out.push_back({path + ".length", Json(a.size()), Json(b.size()),
                           std::fabs(double(a.size()) - double(b.size()))});
        }
        std::size_t n = std::min(a.size(), b.size());
        for (std::size_t i = 0; i < n; ++i) {
            diff_walk(a[i], b[i], path + "[" + std::to_string(i) + "]", tol, out);
        }
        return;
    }
    if (a != b) out.push_back({path, a, b, 0.0});
}

}  // namespace

std::vector<Discrepancy> diff_reports(const Json& a, const Json& b, double tol) {
    const Json* sa = a.contains("meta") && a["meta"].contains("schema") ? &a["meta"]["schema"]
                                                                        : nullptr;
    const Json* sb = b.contains("meta") && b["meta"].contains("schema") ? &b["meta"]["schema"]
                                                                        : nullptr;
    if (!sa || !sb || *sa != *sb) {
        throw std::runtime_error("schema mismatch at meta.schema");
    }
    std::vector<Discrepancy> out;
    diff_walk(a, b, "$", tol, out);
    return out;
}

}  // namespace stabkit
