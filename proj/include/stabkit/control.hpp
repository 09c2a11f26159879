#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stabkit/equilibria.hpp"
#include "stabkit/stability.hpp"
#include "stabkit/system.hpp"

namespace stabkit {

/// Combined mode drives g and g_incr together from the perturbed pair;
/// nominal-only mode uses only f plus the constant offsets a and b.
enum class ControlMode { Combined, NominalOnly };
const char* control_mode_name(ControlMode m);

/// State-feedback rule: each g term is a scaled delayed copy of the matching
/// open-loop component. The schedule is pure; realized per-step gains live in
/// the simulation result so they can be audited after the fact.
struct GainSchedule {
    ControlMode mode = ControlMode::Combined;
    int sigma = 0;        // delay of the f copy
    int sigma_tilde = 0;  // delay of the f_incr copy (combined mode)
    double gamma = 0.75;  // fraction of the admissible magnitude, in [0, 1]
    double denom_tol = 1e-12;
    double x_bar_open = 0.0;    // open-loop perturbed equilibrium (sign reference)
    double x_bar_target = 0.0;  // closed-loop target equilibrium (magnitude reference)
    double a = 0.0, b = 0.0;    // nominal-only offsets, constants
};

/// One realized step of the feedback rule. `window` is the extended history
/// (newest first) the step was computed from, kept so audits can replay it.
struct GainStep {
    int n = 0;  // 1-based step index; the step produced values[n-1]
    double lambda = 0.0, lambda_tilde = 0.0;
    double f_cur = 0.0, f_incr_cur = 0.0;
    double f_delayed = 0.0, f_incr_delayed = 0.0;
    double magnitude_target = 0.0;  // gamma-scaled magnitude the gains realize
    bool degenerate = false;        // delayed-denominator below denom_tol
    std::vector<double> window;
};

/// Validated pairing of a bundle with a gain schedule. Evaluates the scalar
/// closed-loop recursion
///   x_next = f + f_incr + lambda * f_delayed + lambda_tilde * f_incr_delayed
/// over an extended window of length order() + max(sigma, sigma_tilde).
/// Exactly-zero gain terms are skipped, so a zero-gain loop reproduces the
/// perturbed variant bit for bit.
class ClosedLoop {
  public:
    ClosedLoop(const SystemBundle& bundle, GainSchedule schedule);

    int order() const { return order_; }
    int window_size() const { return window_; }
    const GainSchedule& schedule() const { return schedule_; }
    const SystemBundle& bundle() const { return bundle_; }

    /// Realized gains for one step; `window` must have window_size() entries.
    GainStep gains_at(std::span<const double> window) const;
    /// Next scalar value for one step.
    double step(std::span<const double> window) const;
    /// Adapter for certificates, invariance checks, and traces.
    ScalarSystem as_scalar_system() const;

  private:
    SystemBundle bundle_;
    GainSchedule schedule_;
    int order_ = 1;
    int window_ = 1;
};

GainSchedule synthesize_combined(const SystemBundle& b, double x_bar_open, double x_bar_closed,
                                 int sigma = 0, int sigma_tilde = 0, double gamma = 0.75,
                                 double denom_tol = 1e-12);

/// Offsets default to f_incr evaluated at the constant windows of the two
/// centers: a at x_bar_closed, b at x_bar_open.
GainSchedule synthesize_nominal_only(const SystemBundle& b, double x_bar_open,
                                     double x_bar_closed, int sigma = 0, double gamma = 0.75,
                                     std::optional<double> a = {},
                                     std::optional<double> b_offset = {},
                                     double denom_tol = 1e-12);

ClosedLoop close_loop(const SystemBundle& b, const GainSchedule& schedule);

struct SimulationResult {
    std::vector<double> values;  // generated scalars only, like a scalar run
    std::vector<GainStep> steps;
    bool truncated = false;
    std::string truncation_reason;
};

/// History is newest first and must cover the extended window. A nonfinite
/// value truncates the run with a reason, mirroring the open-loop runners.
SimulationResult simulate(const ClosedLoop& loop, std::span<const double> history, int steps);

/// Post-hoc replay of recorded steps: recomputes each step's gains from its
/// stored window and counts exact-replay mismatches, sign disagreements
/// (lambda pushing with the product instead of against it; zero never
/// violates), and magnitude deviations beyond tol.
struct GainAudit {
    int replayed = 0;
    int replay_mismatches = 0;
    int sign_violations = 0;
    int magnitude_violations = 0;
};
GainAudit audit_gains(const ClosedLoop& loop, std::span<const GainStep> steps,
                      double tol = 1e-12);

/// The closed-loop target equilibrium is needed by synthesis before the loop
/// exists; this driver closes the loop at the open-loop equilibrium, re-solves
/// the closed-loop equilibrium nearest the previous iterate, and repeats until
/// the point moves less than tol.
struct EquilibriumResolution {
    GainSchedule schedule;  // final schedule with x_bar_target resolved
    double x_bar = 0.0;
    int rounds = 0;
    bool converged = false;
    double residual = 0.0;  // |h(x_bar * 1) - x_bar| of the final loop
};
EquilibriumResolution resolve_closed_equilibrium(const SystemBundle& b, GainSchedule seed,
                                                 const SolveOptions& solve = {},
                                                 double tol = 1e-10, int max_rounds = 20);

/// Sampled smallness constants of the increment against the two certificates:
///   beta_tilde_min = sup |f_incr(X) - a| / (beta  * ||X - x_bar_closed * 1||)
///   alpha_tilde_min = sup |f_incr(X) - b| / (alpha * ||X - x_bar_open * 1||)
/// Samples inside the exclusion radius of a quotient's own center are skipped
/// for that quotient only. Admissible iff alpha_tilde_min <= 1 and
/// beta_tilde_min < 1/beta - 1.
struct SmallnessReport {
    double beta_tilde_min = 0.0;
    double alpha_tilde_min = 0.0;
    bool admissible = false;
    int beta_samples = 0;
    int alpha_samples = 0;
};
SmallnessReport verify_smallness(const SystemBundle& b, double x_bar_closed, double x_bar_open,
                                 const RegionSpec& S, double a, double b_offset, double beta,
                                 double alpha);

/// Equilibrium-shift admissibility: the shift magnitude must stay below
/// (alpha - beta)/beta times the smallest sampled distance from S.reference
/// (the open-loop equilibrium), distances under r_excl excluded. The
/// untruncated infimum is zero whenever the reference lies in S, which would
/// force a zero shift; strict_forces_zero reports that reading alongside.
struct ShiftBoundReport {
    bool ok = false;
    double threshold = 0.0;
    double margin = 0.0;  // threshold - |shift|
    double min_distance = 0.0;
    bool strict_forces_zero = false;
    std::string note;
};
ShiftBoundReport verify_shift_bound(double shift, double alpha, double beta, const RegionSpec& S,
                                    double r_excl);

}  // namespace stabkit
