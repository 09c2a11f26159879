#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stabkit/expr.hpp"

namespace stabkit {

/// The four additive pieces of the scalar update rule
///   x_n = f(...) + f_incr(...) + g(...) + g_incr(...)
/// where f is the nominal map, f_incr a model perturbation, g the control
/// term, and g_incr an incremental control perturbation.
enum class Component { F, FIncr, G, GIncr };

const char* component_name(Component c);

/// One named component: an expression body together with its role.
/// The component's order is the declared order of its body.
struct ComponentMap {
    LaggedExpr body;
    Component label = Component::F;

    int order() const { return body.order(); }
};

/// Subset of components, used to select which pieces of the update rule
/// participate in an evaluation.
struct ComponentSet {
    bool f = false;
    bool f_incr = false;
    bool g = false;
    bool g_incr = false;

    bool contains(Component c) const;
    ComponentSet with(Component c) const;
    bool operator==(const ComponentSet&) const = default;
};

/// Named system variants and the component subsets they evaluate.
enum class Variant { Nominal, Perturbed, Controlled, ControlledPerturbed };

ComponentSet components_of(Variant v);
const char* variant_name(Variant v);

/// Human-readable label such as "f+f_incr+g".
std::string set_label(ComponentSet s);

/// A scalar difference system assembled from up to four components.
/// The nominal component f is always present; the others are optional and
/// absent components contribute exactly zero.
class SystemBundle {
public:
    explicit SystemBundle(ComponentMap f);

    /// Add or replace a component (slot chosen by its label).
    SystemBundle& set(ComponentMap c);

    bool has(Component c) const;
    const ComponentMap* component(Component c) const;

    /// Order of one component (0 when absent).
    int order(Component c) const;

    /// Order of the subsystem restricted to `s`: max order over the
    /// members of s that are present in the bundle, 0 if none are.
    int order(ComponentSet s) const;
    int order(Variant v) const;

    /// Order of the full system (all present components).
    int order() const;

    /// Evaluate one component on the leading coordinates of `window`
    /// (length >= its order); returns 0 for absent components.
    double component_value(Component c, std::span<const double> window) const;

    /// Left-to-right sum of the selected components in the fixed order
    /// f, f_incr, g, g_incr.  This exact fold is shared by scalar runs
    /// and lifted vector maps, so both produce bit-identical values.
    /// Components are time-invariant; the step-index overload documents
    /// that and ignores the index.
    double scalar_sum(ComponentSet s, std::span<const double> window) const;
    double scalar_sum(ComponentSet s, std::span<const double> window, int step) const;
    double scalar_sum(Variant v, std::span<const double> window) const;

private:
    std::optional<ComponentMap> slots_[4];
};

/// Order-compatibility report: whether a shared equilibrium between the
/// nominal system and its extensions is structurally possible, which
/// requires the added components not to raise the system order.
struct OrderCompatibility {
    int nominal_order = 0;
    int perturbed_order = 0;
    int full_order = 0;
    /// f and f+f_incr can share an equilibrium state vector.
    bool nominal_vs_perturbed = false;
    /// f and the fully extended system can share one.
    bool nominal_vs_full = false;
};

OrderCompatibility order_compatibility(const SystemBundle& b);

/// A first-order vector map F: R^m -> R^m of companion shape.  The first
/// coordinate of the image is the sum of scalar head terms h_i(X); the
/// remaining coordinates are either the shift tail (X_1, ..., X_{m-1})
/// or all zeros.  Sums of maps concatenate head terms in order, and at
/// most one summand may carry the shift tail.
class VectorMap {
public:
    using Head = std::function<double(std::span<const double>)>;

    /// (h(X), X_1, ..., X_{m-1})
    static VectorMap leading(int dim, Head h);
    /// (h(X), 0, ..., 0)
    static VectorMap additive(int dim, Head h);

    int dimension() const { return dim_; }
    bool has_shift_tail() const { return shift_tail_; }

    /// First image coordinate: left-to-right sum of head terms.
    double head(std::span<const double> state) const;

    /// Full image vector.  The map is time-invariant; the step-index
    /// overload documents that and ignores the index.
    std::vector<double> apply(std::span<const double> state) const;
    std::vector<double> apply(std::span<const double> state, int step) const;

    /// Pointwise sum.  Dimensions must agree and at most one operand may
    /// have the shift tail; throws std::invalid_argument otherwise.
    friend VectorMap operator+(const VectorMap& a, const VectorMap& b);

private:
    VectorMap(int dim, bool shift_tail) : dim_(dim), shift_tail_(shift_tail) {}

    int dim_ = 0;
    bool shift_tail_ = false;
    std::vector<Head> heads_;
};

/// Companion lift of a scalar component to dimension m >= its order:
/// value row on top, shift rows below.
VectorMap lift_leading(const ComponentMap& c, int m);

/// Zero-padding lift: value row on top, zero rows below.  Summing one
/// leading lift with additive lifts reproduces the companion form of the
/// summed scalar rule.
VectorMap lift_additive(const ComponentMap& c, int m);

/// Companion form of the subsystem selected by `s`, at dimension
/// m = b.order(s) (or an explicit m >= that).  Built as the leading lift
/// of f plus additive lifts of the remaining selected components, in the
/// fixed order f, f_incr, g, g_incr.
VectorMap associate_map(const SystemBundle& b, ComponentSet s);
VectorMap associate_map(const SystemBundle& b, ComponentSet s, int m);
VectorMap associate_map(const SystemBundle& b, Variant v);

/// Orbit of a vector map.  `states` holds X_0, ..., X_K in order; if the
/// map hit an undefined value or overflow at step K+1, `truncated` is set
/// ("diverged-nonfinite" appears in the reason for overflow) and the
/// orbit stops at X_K.
struct Trajectory {
    std::vector<std::vector<double>> states;
    std::optional<Variant> variant;
    std::vector<double> initial_history;
    bool truncated = false;
    std::string truncation_reason;

    /// First coordinates x_0, x_1, ... of the stored states.
    std::vector<double> scalars() const;
};

Trajectory iterate(const VectorMap& map, std::span<const double> x0, int steps);

/// Scalar-form run of the subsystem selected by `s`.  `history` is the
/// initial window, newest first: history[0] = x_0, history[1] = x_{-1},
/// and so on; its length must be at least b.order(s).  Returns
/// x_1, ..., x_N (shorter with `truncated` set if evaluation failed).
struct ScalarRun {
    std::vector<double> values;
    bool truncated = false;
    std::string truncation_reason;
};

ScalarRun scalar_run(const SystemBundle& b, ComponentSet s, std::span<const double> history,
                     int steps);
ScalarRun scalar_run(const SystemBundle& b, Variant v, std::span<const double> history,
                     int steps);

}  // namespace stabkit
