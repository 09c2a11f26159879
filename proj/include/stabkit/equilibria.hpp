#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "stabkit/system.hpp"

namespace stabkit {

/// A scalar equilibrium x̄ of the subsystem selected by `set`: the
/// constant vector X̄ = (x̄, ..., x̄) satisfies X̄ = V(X̄) up to the
/// recorded residual |h(x̄, ..., x̄) − x̄|.
struct EquilibriumPoint {
    double x = 0.0;
    ComponentSet set;
    double residual = 0.0;

    std::vector<double> state(int m) const {
        return std::vector<double>(static_cast<std::size_t>(m), x);
    }
};

/// Options for the scalar root scan: ψ(x) = h(x, ..., x) − x is evaluated
/// on `grid` equal subintervals of [lo, hi]; sign changes are refined by
/// bisection until |ψ| ≤ tol; roots closer than 10·tol are merged.
struct SolveOptions {
    double lo = -1.0;
    double hi = 1.0;
    int grid = 400;
    double tol = 1e-10;
};

/// Roots of an arbitrary scalar residual over the scan interval: grid scan
/// with |psi| <= tol plateau detection, bisection on sign changes, duplicates
/// within 10*tol merged. Shared by the bundle solvers and the closed-loop
/// equilibrium driver.
std::vector<double> find_roots(const std::function<double(double)>& psi,
                               const SolveOptions& opts);

std::vector<EquilibriumPoint> find_equilibria(const SystemBundle& b, ComponentSet s,
                                              const SolveOptions& opts);
std::vector<EquilibriumPoint> find_equilibria(const SystemBundle& b, Variant v,
                                              const SolveOptions& opts);

struct ResidualCheck {
    bool ok = false;
    double residual = 0.0;
};

ResidualCheck check_equilibrium(const SystemBundle& b, ComponentSet s, double x, double tol);
ResidualCheck check_equilibrium(const SystemBundle& b, Variant v, double x, double tol);

/// A periodic tail pattern of a trajectory.  `values` lists the pattern
/// in time order; values.back() is the latest sample.  `replay_deviation`
/// is the largest error seen when the recursion is restarted from the
/// pattern's own values and run for one full period.
struct OscillationPattern {
    int period = 1;
    std::vector<double> values;
    double replay_deviation = 0.0;

    /// A period-1 pattern is a (numerical) equilibrium.
    bool is_equilibrium() const { return period == 1; }
};

/// Scan the trajectory tail for the smallest period p <= max_period such
/// that |x_n − x_{n−p}| <= tol across the last `tail_window` samples.
/// The map is the recursion that produced the trajectory; it is replayed
/// over one period to fill replay_deviation.  Requires the trajectory to
/// hold at least tail_window + max_period samples and
/// tail_window >= 2·max_period.
std::optional<OscillationPattern> detect_oscillation(const VectorMap& map, const Trajectory& traj,
                                                     int max_period, int tail_window, double tol);

/// m x m companion-form Jacobian: first row is the gradient of the scalar
/// head, rows 2..m are the shifted identity placed exactly.
struct CompanionMatrix {
    Eigen::MatrixXd m;
};

struct FdOptions {
    double h_rel = 1e-6;
    double h_abs = 1e-8;
};

/// Central finite differences on the head with per-coordinate step
/// max(h_abs, h_rel·|X_j|); the shift rows are set structurally.
CompanionMatrix companion_jacobian(const VectorMap& map, std::span<const double> X,
                                   const FdOptions& fd = {});

/// Induced l-infinity matrix norm (max absolute row sum).
double matrix_norm_inf(const Eigen::MatrixXd& m);

/// Which pair of subsystems a linear estimate relates: the estimate
/// starts from an equilibrium of `base` and predicts where the
/// equilibrium of base ∪ perturbing lands.  Exactly four patterns are
/// admissible; each requires order(perturbing) <= order(base).
struct EstimatePattern {
    ComponentSet base;
    ComponentSet perturbing;

    /// x̄⁰ -> x̄⁰ᵖ: nominal to perturbed.
    static EstimatePattern nominal_to_perturbed();
    /// x̄⁰ -> x̄ᶜ: nominal to controlled.
    static EstimatePattern nominal_to_controlled();
    /// x̄⁰ -> x̄ᶜᵖ (no incremental term): nominal to perturbed controlled.
    static EstimatePattern nominal_to_controlled_perturbed();
    /// x̄ᶜ -> x̄ᶜᵖ: nominal-controller loop to the loop with the
    /// incremental term added.
    static EstimatePattern incremental_completion();
};

enum class EstimateClass { Unique, InfinitelyMany, None };

const char* estimate_class_name(EstimateClass c);

/// First-order estimate X̂ = X̄ + (I − M)⁻¹ V of the shifted equilibrium,
/// with the solvability trichotomy of the linear system (I − M)Δ = V:
/// unique when I − M has full rank, infinitely many when the system is
/// consistent but rank-deficient (least-norm member reported), none when
/// inconsistent.  When ‖M‖∞ < 1 the contraction bound
/// ‖X̂ − X̄‖∞ ≤ ‖V‖∞ / (1 − ‖M‖∞) is reported.
struct LinearEstimate {
    EstimatePattern pattern;
    Eigen::VectorXd base;
    Eigen::MatrixXd companion;
    Eigen::VectorXd residual_vector;
    EstimateClass classification = EstimateClass::None;
    std::optional<Eigen::VectorXd> estimate;
    std::optional<double> contraction_bound;
    double m_norm_inf = 0.0;
    double rank_tol_used = 0.0;
    int rank = 0;
    int rank_augmented = 0;
};

/// Thrown when a pattern's order hypothesis fails or the pattern is not
/// one of the four admissible shapes.
class HypothesisError : public std::runtime_error {
public:
    explicit HypothesisError(const std::string& what) : std::runtime_error(what) {}
};

/// Throws HypothesisError unless the pattern is one of the four supported
/// shapes and the perturbing order stays within the base order. Runs before
/// any numeric work, so callers can gate pipelines on it.
void validate_pattern(const SystemBundle& b, const EstimatePattern& p);

/// rank_tol <= 0 selects the default 1e-9 · ‖I − M‖∞.
LinearEstimate linear_estimate(const SystemBundle& b, const EstimatePattern& pattern,
                               double x_base, double rank_tol = 0.0, const FdOptions& fd = {});

/// One row of an estimate-accuracy sweep over a parameterized family.
struct ErrorCurveRow {
    double eps = 0.0;
    double x_base = 0.0;
    std::optional<Eigen::VectorXd> estimate;
    std::optional<double> x_true;
    double error = 0.0;
    bool flagged = false;
    EstimateClass classification = EstimateClass::None;
};

/// For each ε: find the base equilibrium (continuation from the previous
/// row, seeded nearest the interval midpoint), estimate the shifted
/// equilibrium, find the true shifted equilibrium nearest the estimate,
/// and record ‖X̂ − X̄_true‖∞.  Rows with no solvable estimate or no true
/// root are flagged.
std::vector<ErrorCurveRow> estimate_error_curve(
    const std::function<SystemBundle(double)>& family, const EstimatePattern& pattern,
    std::span<const double> eps_values, const SolveOptions& opts);

}  // namespace stabkit
