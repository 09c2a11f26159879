#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stabkit/config.hpp"
#include "stabkit/report.hpp"

namespace stabkit {

/// Result of one analysis run: the report that was written, the files it
/// produced, and the exit code the process should return (0 all verdicts
/// obtained, 2 at least one verdict inconclusive).
struct RunOutcome {
    int exit_code = 0;
    Json report;
    std::vector<std::string> files;
};

/// Executes one subcommand pipeline over the configured system and writes
/// the report (and any CSV) under out_dir:
///   equilibria  - root tables for every distinct configured subsystem
///   estimate    - first-order equilibrium-shift estimates at each base root
///   certify     - growth certificates and verdicts over the region
///   synthesize  - gain schedule, closed-loop target, and paired verdicts
///   simulate    - trajectory (closed-loop when [control] is present)
///   full        - all of the above that the config supports
/// Identical configs and seeds produce byte-identical reports.
/// Configuration and hypothesis errors throw; they are not encoded in the
/// exit code here.
RunOutcome run_analysis(const AnalysisConfig& cfg, const std::string& subcommand,
                        const std::string& out_dir,
                        std::optional<std::uint64_t> seed_override = {});

/// One-line-per-section human summary of a report.
std::string summarize(const Json& report);

}  // namespace stabkit
