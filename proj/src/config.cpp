#include "stabkit/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "stabkit/expr.hpp"

namespace stabkit {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(const std::string& file, int line, const std::string& field,
                       const std::string& detail) {
    throw ConfigError(file + ":" + std::to_string(line) + ": " + field + ": " + detail);
}

const std::map<std::string, std::vector<std::string>>& known_keys() {
    static const std::map<std::string, std::vector<std::string>> keys = {
        {"system",
         {"f", "f_order", "f_incr", "f_incr_order", "g", "g_order", "g_incr", "g_incr_order"}},
        {"region", {"shape", "center", "radius", "lo", "hi", "samples", "seed", "r_excl"}},
        {"solver", {"lo", "hi", "grid", "tol", "rank_tol", "fd_h_rel", "fd_h_abs", "pattern"}},
        {"control",
         {"mode", "sigma", "sigma_tilde", "gamma", "denom_tol", "a", "b", "x_bar_open",
          "x_bar_target"}},
        {"run", {"history", "steps", "max_period", "tail_window", "osc_tol"}},
        {"output", {"report", "trajectory_csv"}},
    };
    return keys;
}

/// Raw values plus the line each key appeared on, for error messages.
struct RawWithLines {
    RawConfig raw;
    std::map<std::string, std::map<std::string, int>> lines;
    std::string file;

    bool has(const std::string& sec, const std::string& key) const {
        auto s = raw.sections.find(sec);
        return s != raw.sections.end() && s->second.count(key) > 0;
    }
    const std::string& at(const std::string& sec, const std::string& key) const {
        return raw.sections.at(sec).at(key);
    }
    int line(const std::string& sec, const std::string& key) const {
        return lines.at(sec).at(key);
    }
    [[noreturn]] void fail_key(const std::string& sec, const std::string& key,
                               const std::string& detail) const {
        fail(file, line(sec, key), "[" + sec + "] " + key, detail);
    }
};

double parse_double(const RawWithLines& r, const std::string& sec, const std::string& key) {
    const std::string text = trim(r.at(sec, key));
    const char* begin = text.data();
    const char* end = begin + text.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) r.fail_key(sec, key, "expected a number, got '" + text + "'");
    return value;
}

long long parse_int(const RawWithLines& r, const std::string& sec, const std::string& key) {
    const std::string text = trim(r.at(sec, key));
    const char* begin = text.data();
    const char* end = begin + text.size();
    long long value = 0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        r.fail_key(sec, key, "expected an integer, got '" + text + "'");
    return value;
}

std::uint64_t parse_u64(const RawWithLines& r, const std::string& sec, const std::string& key) {
    const std::string text = trim(r.at(sec, key));
    const char* begin = text.data();
    const char* end = begin + text.size();
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        r.fail_key(sec, key, "expected an unsigned integer, got '" + text + "'");
    return value;
}

std::vector<double> parse_list(const RawWithLines& r, const std::string& sec,
                               const std::string& key) {
    const std::string text = r.at(sec, key);
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string item = trim(text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                            : comma - pos));
        if (item.empty()) r.fail_key(sec, key, "empty entry in list");
        const char* begin = item.data();
        const char* end = begin + item.size();
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc{} || ptr != end)
            r.fail_key(sec, key, "expected a number, got '" + item + "'");
        out.push_back(value);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

RawWithLines parse_raw(const std::string& text, const std::string& filename) {
    RawWithLines r;
    r.file = filename;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') fail(filename, lineno, t, "unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (known_keys().find(section) == known_keys().end()) {
                fail(filename, lineno, "[" + section + "]", "unknown section");
            }
            // re-opening a section is allowed; duplicate keys are not
            r.raw.sections[section];
            r.lines[section];
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) fail(filename, lineno, t, "expected key = value");
        if (section.empty()) fail(filename, lineno, t, "key appears before any [section]");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        const auto& allowed = known_keys().at(section);
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            fail(filename, lineno, "[" + section + "] " + key, "unknown key");
        }
        if (r.raw.sections[section].count(key) > 0) {
            fail(filename, lineno, "[" + section + "] " + key, "duplicate key");
        }
        r.raw.sections[section][key] = value;
        r.lines[section][key] = lineno;
    }
    return r;
}

struct ComponentKey {
    Component component;
    const char* expr;
    const char* order;
};

constexpr ComponentKey kComponentKeys[] = {
    {Component::F, "f", "f_order"},
    {Component::FIncr, "f_incr", "f_incr_order"},
    {Component::G, "g", "g_order"},
    {Component::GIncr, "g_incr", "g_incr_order"},
};

}  // namespace

AnalysisConfig parse_config(const std::string& text, const std::string& filename) {
    RawWithLines r = parse_raw(text, filename);
    AnalysisConfig cfg;
    cfg.raw = r.raw;

    for (const auto& ck : kComponentKeys) {
        if (!r.has("system", ck.expr)) {
            if (r.has("system", ck.order)) {
                r.fail_key("system", ck.order, "order given without an expression");
            }
            continue;
        }
        ComponentSpec spec;
        spec.text = r.at("system", ck.expr);
        if (r.has("system", ck.order)) {
            long long o = parse_int(r, "system", ck.order);
            if (o < 1 || o > 32) r.fail_key("system", ck.order, "order must lie in [1, 32]");
            spec.order = static_cast<int>(o);
        }
        // parse now so bad expressions fail with the field named, before any
        // numeric work; absent orders resolve to the largest referenced lag
        try {
            LaggedExpr probe = LaggedExpr::parse(spec.text, spec.order.value_or(32));
            if (!spec.order) spec.order = std::max(1, probe.max_lag());
        } catch (const ParseError& e) {
            r.fail_key("system", ck.expr, e.what());
        }
        cfg.components[ck.component] = spec;
    }
    if (cfg.components.count(Component::F) == 0) {
        throw ConfigError(filename + ": missing required [system] f expression");
    }

    if (r.raw.sections.count("region") > 0) {
        RegionSpec s;
        if (r.has("region", "shape")) {
            std::string shape = trim(r.at("region", "shape"));
            if (shape == "ball") {
                s.shape = RegionShape::Ball;
            } else if (shape == "box") {
                s.shape = RegionShape::Box;
            } else {
                r.fail_key("region", "shape", "expected ball or box, got '" + shape + "'");
            }
        }
        if (!r.has("region", "center")) {
            throw ConfigError(filename + ": [region] needs a center");
        }
        s.center = parse_list(r, "region", "center");
        if (r.has("region", "radius")) s.radius = parse_double(r, "region", "radius");
        if (r.has("region", "lo")) s.lo = parse_list(r, "region", "lo");
        if (r.has("region", "hi")) s.hi = parse_list(r, "region", "hi");
        if (r.has("region", "samples")) {
            long long n = parse_int(r, "region", "samples");
            if (n < 1) r.fail_key("region", "samples", "must be at least 1");
            s.sample_count = static_cast<int>(n);
        }
        if (r.has("region", "seed")) s.rng_seed = parse_u64(r, "region", "seed");
        if (r.has("region", "r_excl")) s.r_excl = parse_double(r, "region", "r_excl");
        try {
            validate_region(s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(filename + ": [region]: " + e.what());
        }
        cfg.region = s;
    }

    if (r.raw.sections.count("solver") > 0) {
        if (r.has("solver", "lo")) cfg.solver.lo = parse_double(r, "solver", "lo");
        if (r.has("solver", "hi")) cfg.solver.hi = parse_double(r, "solver", "hi");
        if (r.has("solver", "grid")) {
            long long g = parse_int(r, "solver", "grid");
            if (g < 2) r.fail_key("solver", "grid", "must be at least 2");
            cfg.solver.grid = static_cast<int>(g);
        }
        if (r.has("solver", "tol")) {
            cfg.solver.tol = parse_double(r, "solver", "tol");
            if (!(cfg.solver.tol > 0.0)) r.fail_key("solver", "tol", "must be positive");
        }
        if (cfg.solver.lo >= cfg.solver.hi) {
            throw ConfigError(filename + ": [solver]: lo must be below hi");
        }
        if (r.has("solver", "rank_tol")) cfg.rank_tol = parse_double(r, "solver", "rank_tol");
        if (r.has("solver", "fd_h_rel")) {
            cfg.fd.h_rel = parse_double(r, "solver", "fd_h_rel");
            if (!(cfg.fd.h_rel > 0.0)) r.fail_key("solver", "fd_h_rel", "must be positive");
        }
        if (r.has("solver", "fd_h_abs")) {
            cfg.fd.h_abs = parse_double(r, "solver", "fd_h_abs");
            if (!(cfg.fd.h_abs > 0.0)) r.fail_key("solver", "fd_h_abs", "must be positive");
        }
        if (r.has("solver", "pattern")) {
            std::string p = trim(r.at("solver", "pattern"));
            static const char* names[] = {"incremental", "control", "incrementalControl",
                                          "completion"};
            if (std::find_if(std::begin(names), std::end(names),
                             [&](const char* n) { return p == n; }) == std::end(names)) {
                r.fail_key("solver", "pattern",
                           "expected incremental, control, incrementalControl, or completion");
            }
            cfg.pattern = p;
        }
    }

    if (r.raw.sections.count("control") > 0) {
        ControlConfig c;
        if (r.has("control", "mode")) {
            std::string mode = trim(r.at("control", "mode"));
            if (mode == "combined") {
                c.mode = ControlMode::Combined;
            } else if (mode == "nominalOnly") {
                c.mode = ControlMode::NominalOnly;
            } else {
                r.fail_key("control", "mode", "expected combined or nominalOnly, got '" + mode +
                                                  "'");
            }
        }
        if (r.has("control", "sigma")) {
            long long v = parse_int(r, "control", "sigma");
            if (v < 0) r.fail_key("control", "sigma", "must be nonnegative");
            c.sigma = static_cast<int>(v);
        }
        if (r.has("control", "sigma_tilde")) {
            long long v = parse_int(r, "control", "sigma_tilde");
            if (v < 0) r.fail_key("control", "sigma_tilde", "must be nonnegative");
            c.sigma_tilde = static_cast<int>(v);
        }
        if (r.has("control", "gamma")) {
            c.gamma = parse_double(r, "control", "gamma");
            if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) {
                r.fail_key("control", "gamma", "must lie in [0, 1]");
            }
        }
        if (r.has("control", "denom_tol")) {
            c.denom_tol = parse_double(r, "control", "denom_tol");
            if (!(c.denom_tol > 0.0)) r.fail_key("control", "denom_tol", "must be positive");
        }
        if (r.has("control", "a")) c.a = parse_double(r, "control", "a");
        if (r.has("control", "b")) c.b = parse_double(r, "control", "b");
        if (r.has("control", "x_bar_open")) c.x_bar_open = parse_double(r, "control", "x_bar_open");
        if (r.has("control", "x_bar_target")) {
            c.x_bar_target = parse_double(r, "control", "x_bar_target");
        }
        cfg.control = c;
    }

    if (r.raw.sections.count("run") > 0) {
        RunConfig rc;
        if (!r.has("run", "history")) {
            throw ConfigError(filename + ": [run] needs an initial history");
        }
        rc.history = parse_list(r, "run", "history");
        if (r.has("run", "steps")) {
            long long v = parse_int(r, "run", "steps");
            if (v < 1) r.fail_key("run", "steps", "must be at least 1");
            rc.steps = static_cast<int>(v);
        }
        if (r.has("run", "max_period")) {
            long long v = parse_int(r, "run", "max_period");
            if (v < 1) r.fail_key("run", "max_period", "must be at least 1");
            rc.max_period = static_cast<int>(v);
        }
        if (r.has("run", "tail_window")) {
            long long v = parse_int(r, "run", "tail_window");
            if (v < 2) r.fail_key("run", "tail_window", "must be at least 2");
            rc.tail_window = static_cast<int>(v);
        }
        if (r.has("run", "osc_tol")) {
            rc.osc_tol = parse_double(r, "run", "osc_tol");
            if (!(rc.osc_tol > 0.0)) r.fail_key("run", "osc_tol", "must be positive");
        }
        cfg.run = rc;
    }

    if (r.raw.sections.count("output") > 0) {
        if (r.has("output", "report")) cfg.output.report = trim(r.at("output", "report"));
        if (r.has("output", "trajectory_csv")) {
            cfg.output.trajectory_csv = trim(r.at("output", "trajectory_csv"));
        }
    }

    return cfg;
}

AnalysisConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

SystemBundle AnalysisConfig::make_bundle() const {
    const ComponentSpec& f = components.at(Component::F);
    SystemBundle b(ComponentMap{LaggedExpr::parse(f.text, *f.order), Component::F});
    for (const auto& [component, spec] : components) {
        if (component == Component::F) continue;
        b.set(ComponentMap{LaggedExpr::parse(spec.text, *spec.order), component});
    }
    return b;
}

RegionSpec AnalysisConfig::region_for(int m, std::optional<std::uint64_t> seed_override) const {
    if (!region) throw ConfigError("this analysis needs a [region] section");
    RegionSpec s = *region;
    auto extend = [m](std::vector<double>& v) {
        if (v.size() == 1 && m > 1) v.assign(static_cast<std::size_t>(m), v[0]);
    };
    extend(s.center);
    extend(s.lo);
    extend(s.hi);
    extend(s.reference);
    if (s.dimension() != m) {
        throw ConfigError("[region] center has dimension " + std::to_string(s.dimension()) +
                          " but the analyzed system has order " + std::to_string(m));
    }
    if (seed_override) s.rng_seed = *seed_override;
    try {
        validate_region(s);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[region]: ") + e.what());
    }
    return s;
}

}  // namespace stabkit
