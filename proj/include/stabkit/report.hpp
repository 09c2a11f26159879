#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "stabkit/control.hpp"
#include "stabkit/equilibria.hpp"
#include "stabkit/stability.hpp"

namespace stabkit {

using Json = nlohmann::json;

/// JSON views of the analysis results. nlohmann keeps object keys sorted, so
/// a report built from the same values dumps to the same bytes.
Json to_json(const EquilibriumPoint& p);
Json to_json(const LinearEstimate& e);
Json to_json(const GrowthCertificate& c);
Json to_json(const InvarianceResult& r);
Json to_json(const ContractionTrace& t);
Json to_json(const SideVerdict& v);
Json to_json(const GainSchedule& s);
Json to_json(const GainAudit& a);
Json to_json(const EquilibriumResolution& r);
Json to_json(const SmallnessReport& r);
Json to_json(const ShiftBoundReport& r);
Json to_json(const OscillationPattern& p);

/// Two-column trajectory table: header n,x_n then one row per generated
/// value, n starting at 1. LF line endings, shortest round-trip numbers.
std::string trajectory_csv(const std::vector<double>& values);

/// Five-column closed-loop table: n,x_n,lambda,lambda_tilde,bound where
/// bound is the gamma-scaled magnitude the gains were sized to.
std::string gains_csv(const SimulationResult& sim);

void write_text_file(const std::string& path, const std::string& content);

/// One leaf-level difference between two reports of identical shape.
struct Discrepancy {
    std::string path;
    Json a, b;
    double delta = 0.0;  // |a - b| for numeric leaves, 0 otherwise
};

/// Structural comparison of two reports. Object shapes must match exactly
/// (same keys, same types) or std::runtime_error names the first divergent
/// path. Array lengths are data, not schema: a length change is reported as
/// a "<path>.length" discrepancy and the shared prefix is still compared.
/// Numeric leaves differing by more than tol and any unequal non-numeric
/// leaves are returned as discrepancies.
std::vector<Discrepancy> diff_reports(const Json& a, const Json& b, double tol);

}  // namespace stabkit
