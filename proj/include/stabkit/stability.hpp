#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stabkit/system.hpp"

namespace stabkit {

/// Sampled region of state space. The ball is an l-infinity ball; the box is
/// axis-aligned. `reference` is the center of the exclusion ball (defaults to
/// `center` when empty); samples closer than r_excl to it are rejected.
enum class RegionShape { Ball, Box };

struct RegionSpec {
    RegionShape shape = RegionShape::Ball;
    std::vector<double> center;
    double radius = 1.0;
    std::vector<double> lo, hi;  // Box only, same dimension as center
    int sample_count = 256;
    std::uint64_t rng_seed = 0;
    double r_excl = -1.0;  // negative selects the default 1e-6 * extent
    std::vector<double> reference;

    int dimension() const;
    /// half the largest extent for boxes, radius for balls
    double extent() const;
    double effective_r_excl() const;
    std::vector<double> reference_point() const;
};

/// Throws std::invalid_argument when the region violates its invariants
/// (positive extent, sample_count >= 1, 0 <= r_excl < extent, matching
/// dimensions).
void validate_region(const RegionSpec& s);

/// Membership with a 1e-12 relative slack so boundary probes mapped through
/// the identity still count as inside.
bool region_contains(const RegionSpec& s, std::span<const double> state);

/// Deterministic sample list: the 2m face midpoints first (those outside the
/// exclusion ball), then `sample_count` uniform draws rejection-sampled
/// against the exclusion ball. Same region, same list; growing sample_count
/// extends the draw list without changing its prefix.
std::vector<std::vector<double>> sample_region(const RegionSpec& s);

/// First-order form of an arbitrary scalar recursion: `head` maps the
/// current window (newest first) to the next scalar, `apply` shifts it in.
/// Adapts closed loops and other non-expression maps to the certificate,
/// invariance, and trace machinery below.
struct ScalarSystem {
    std::function<double(std::span<const double>)> head;
    int dimension = 1;

    std::vector<double> apply(std::span<const double> state) const;
};

/// One sample point together with its scalar image and growth ratio.
struct RatioWitness {
    std::vector<double> state;
    double image = 0.0;
    double ratio = 0.0;
};

/// Optional inflation factors applied to a certificate: alpha shrinks to
/// alpha*(1 - alpha_tilde), beta grows to beta*(1 + beta_tilde).
struct InflationFactors {
    double alpha_tilde = 0.0;
    double beta_tilde = 0.0;
};

/// Sampled growth bounds of a scalar sum about an equilibrium:
///   alpha = inf, beta = sup of |h(X) - x_bar| / ||X - X_bar||_inf.
/// Both are one-sided sampled bounds, not proofs; sample_total records how
/// many ratios entered the reduction.
struct GrowthCertificate {
    ComponentSet set;
    std::string label;  // component-set name, or a caller-supplied tag
    std::vector<double> equilibrium;
    double alpha = 0.0;
    double beta = 0.0;
    RatioWitness argmin, argmax;
    int sample_total = 0;
    int skipped = 0;
    std::optional<double> alpha_inflated, beta_inflated;
    bool inflation_valid = false;
    std::string inflation_note;
};

/// Measures growth ratios of the selected scalar sum over samples of S.
/// The exclusion ball is re-centered on the equilibrium so every ratio has a
/// positive denominator; requires a positive effective r_excl. Samples whose
/// evaluation fails are skipped and counted. Throws std::runtime_error when
/// no sample survives.
GrowthCertificate growth_certificate(const SystemBundle& b, ComponentSet set, double x_bar,
                                     const RegionSpec& S,
                                     std::optional<InflationFactors> inflation = {});
GrowthCertificate growth_certificate(const SystemBundle& b, Variant v, double x_bar,
                                     const RegionSpec& S,
                                     std::optional<InflationFactors> inflation = {});
GrowthCertificate growth_certificate(const ScalarSystem& sys, double x_bar, const RegionSpec& S,
                                     std::optional<InflationFactors> inflation = {},
                                     std::string label = "scalar");

struct RegionWitness {
    std::vector<double> state, image;
};

struct InvarianceResult {
    bool pass = false;
    std::optional<RegionWitness> witness;  // first sampled violation
    int checked = 0;
};

/// Applies the map once to every sample of S and tests that the image stays
/// in S. Sampled evidence only.
InvarianceResult check_invariance(const VectorMap& map, const RegionSpec& S);
InvarianceResult check_invariance(const ScalarSystem& sys, const RegionSpec& S);

enum class Verdict { AsymptoticallyStable, Unstable, Inconclusive };
const char* verdict_name(Verdict v);

/// Per-step distance ratios of one trajectory relative to its start:
/// ratios[n-1] = ||X_n - X_bar|| / ||X_0 - X_bar||.
struct ContractionTrace {
    std::vector<double> ratios;
    double fitted_rate = 0.0;  // (last ratio)^(1/steps)
    bool expanding = false;
    bool truncated = false;
    std::string truncation_reason;
};

/// Requires X0 != X_bar. A nonfinite step truncates the trace and flags it
/// expanding.
ContractionTrace contraction_trace(const VectorMap& map, std::span<const double> x_bar,
                                   std::span<const double> x0, int steps);
ContractionTrace contraction_trace(const ScalarSystem& sys, std::span<const double> x_bar,
                                   std::span<const double> x0, int steps);

/// Evidence-backed verdict for one side of a comparison: the verdict is a
/// pure function of the certificate and this side's own invariance result.
struct SideVerdict {
    Verdict verdict = Verdict::Inconclusive;
    GrowthCertificate certificate;
    InvarianceResult invariance;
    std::vector<ContractionTrace> traces;
};

/// AsymptoticallyStable iff beta < 1 and invariance passed; Unstable iff
/// alpha > 1 (the two cannot overlap since alpha <= beta); else Inconclusive.
Verdict side_verdict(const GrowthCertificate& cert, const InvarianceResult& inv);

/// The three supported uncontrolled/controlled comparisons.
enum class ClassifyCase { NominalVsControlled, PerturbedVsControlledPerturbed, PerturbedVsFull };
const char* classify_case_name(ClassifyCase c);
/// Component sets of the (uncontrolled, controlled) sides.
std::pair<ComponentSet, ComponentSet> classify_case_sets(ClassifyCase c);

struct ClassifyResult {
    SideVerdict uncontrolled, controlled;
};

/// Certifies both sides over the same region. Throws std::invalid_argument
/// when the two sides have different orders or S has the wrong dimension.
/// Each side's verdict uses its own map's invariance; a small number of
/// contraction traces from the first samples is attached as evidence.
ClassifyResult classify(const SystemBundle& b, ComponentSet uncontrolled, double x_bar_u,
                        ComponentSet controlled, double x_bar_c, const RegionSpec& S);
ClassifyResult classify(const SystemBundle& b, ClassifyCase c, double x_bar_u, double x_bar_c,
                        const RegionSpec& S);

}  // namespace stabkit
