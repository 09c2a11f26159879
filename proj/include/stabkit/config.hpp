#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stabkit/control.hpp"
#include "stabkit/equilibria.hpp"
#include "stabkit/stability.hpp"
#include "stabkit/system.hpp"

namespace stabkit {

/// Config problems carry the file line and the offending section/key so the
/// message always names the field.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raw sectioned key/value text, preserved in file order for the report echo.
struct RawConfig {
    // section -> key -> value; insertion order is irrelevant because reports
    // serialize with sorted keys
    std::map<std::string, std::map<std::string, std::string>> sections;
};

struct ComponentSpec {
    std::string text;
    std::optional<int> order;  // absent: the largest referenced lag
};

struct ControlConfig {
    ControlMode mode = ControlMode::Combined;
    int sigma = 0;
    int sigma_tilde = 0;
    double gamma = 0.75;
    double denom_tol = 1e-12;
    std::optional<double> a, b;
    std::optional<double> x_bar_open;    // absent: solved from the Perturbed variant
    std::optional<double> x_bar_target;  // absent: fixed-point resolution
};

struct RunConfig {
    std::vector<double> history;  // newest first
    int steps = 100;
    std::optional<int> max_period;
    int tail_window = 0;  // 0 selects 2 * max_period
    double osc_tol = 1e-9;
};

struct OutputConfig {
    std::string report = "report.json";
    std::string trajectory_csv = "trajectory.csv";
};

/// One fully validated analysis request. Expressions are kept as text plus
/// declared order; make_bundle parses them again on demand, which cannot fail
/// after validation.
struct AnalysisConfig {
    RawConfig raw;
    std::map<Component, ComponentSpec> components;  // F always present

    std::optional<RegionSpec> region;  // center may be scalar, extended on use
    SolveOptions solver;
    double rank_tol = 0.0;  // 0 selects the estimate default
    FdOptions fd;
    std::optional<std::string> pattern;  // estimate pattern name; absent = auto
    std::optional<ControlConfig> control;
    std::optional<RunConfig> run;
    OutputConfig output;

    SystemBundle make_bundle() const;
    /// Region resized to dimension m: a scalar center is replicated, anything
    /// else must already match. Seed override replaces the configured seed.
    RegionSpec region_for(int m, std::optional<std::uint64_t> seed_override = {}) const;
};

/// Strict INI-style parser: [section] headers, key = value lines, # or ;
/// comments. Unknown sections or keys, duplicates, and malformed values are
/// errors naming file, line, and field. Expressions are parsed with their
/// declared orders here, before any numeric work.
AnalysisConfig parse_config(const std::string& text, const std::string& filename = "config");
AnalysisConfig load_config(const std::string& path);

}  // namespace stabkit
