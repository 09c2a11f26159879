#include "stabkit/system.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stabkit {

namespace {

constexpr Component kAllComponents[4] = {Component::F, Component::FIncr, Component::G,
                                         Component::GIncr};

std::size_t slot_of(Component c) { return static_cast<std::size_t>(c); }

}  // namespace

const char* component_name(Component c) {
    switch (c) {
        case Component::F: return "f";
        case Component::FIncr: return "f_incr";
        case Component::G: return "g";
        case Component::GIncr: return "g_incr";
    }
    return "?";
}

bool ComponentSet::contains(Component c) const {
    switch (c) {
        case Component::F: return f;
        case Component::FIncr: return f_incr;
        case Component::G: return g;
        case Component::GIncr: return g_incr;
    }
    return false;
}

ComponentSet ComponentSet::with(Component c) const {
    ComponentSet s = *this;
    switch (c) {
        case Component::F: s.f = true; break;
        case Component::FIncr: s.f_incr = true; break;
        case Component::G: s.g = true; break;
        case Component::GIncr: s.g_incr = true; break;
    }
    return s;
}

ComponentSet components_of(Variant v) {
    switch (v) {
        case Variant::Nominal: return {true, false, false, false};
        case Variant::Perturbed: return {true, true, false, false};
        case Variant::Controlled: return {true, false, true, false};
        case Variant::ControlledPerturbed: return {true, true, true, true};
    }
    return {};
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Nominal: return "nominal";
        case Variant::Perturbed: return "perturbed";
        case Variant::Controlled: return "controlled";
        case Variant::ControlledPerturbed: return "controlled_perturbed";
    }
    return "?";
}

std::string set_label(ComponentSet s) {
    std::string out;
    for (Component c : kAllComponents) {
        if (!s.contains(c)) continue;
        if (!out.empty()) out += '+';
        out += component_name(c);
    }
    if (out.empty()) out = "(empty)";
    return out;
}

SystemBundle::SystemBundle(ComponentMap f) {
    if (f.label != Component::F) {
        throw std::invalid_argument("bundle must be rooted at an f component");
    }
    slots_[slot_of(Component::F)] = std::move(f);
}

SystemBundle& SystemBundle::set(ComponentMap c) {
    slots_[slot_of(c.label)] = std::move(c);
    return *this;
}

bool SystemBundle::has(Component c) const { return slots_[slot_of(c)].has_value(); }

const ComponentMap* SystemBundle::component(Component c) const {
    const auto& slot = slots_[slot_of(c)];
    return slot ? &*slot : nullptr;
}

int SystemBundle::order(Component c) const {
    const auto& slot = slots_[slot_of(c)];
    return slot ? slot->order() : 0;
}

int SystemBundle::order(ComponentSet s) const {
    int m = 0;
    for (Component c : kAllComponents) {
        if (s.contains(c)) m = std::max(m, order(c));
    }
    return m;
}

int SystemBundle::order(Variant v) const { return order(components_of(v)); }

int SystemBundle::order() const {
    return order(ComponentSet{true, true, true, true});
}

double SystemBundle::component_value(Component c, std::span<const double> window) const {
    const auto& slot = slots_[slot_of(c)];
    if (!slot) return 0.0;
    return slot->body.evaluate(window);
}

double SystemBundle::scalar_sum(ComponentSet s, std::span<const double> window) const {
    bool first = true;
    double acc = 0.0;
    for (Component c : kAllComponents) {
        if (!s.contains(c) || !has(c)) continue;
        double v = component_value(c, window);
        if (first) {
            acc = v;
            first = false;
        } else {
            acc += v;
        }
    }
    return acc;
}

double SystemBundle::scalar_sum(ComponentSet s, std::span<const double> window, int step) const {
    (void)step;
    return scalar_sum(s, window);
}

double SystemBundle::scalar_sum(Variant v, std::span<const double> window) const {
    return scalar_sum(components_of(v), window);
}

OrderCompatibility order_compatibility(const SystemBundle& b) {
    OrderCompatibility r;
    r.nominal_order = b.order(Variant::Nominal);
    r.perturbed_order = b.order(Variant::Perturbed);
    r.full_order = b.order();
    r.nominal_vs_perturbed = (r.nominal_order == r.perturbed_order);
    r.nominal_vs_full = (r.nominal_order == r.full_order);
    return r;
}

VectorMap VectorMap::leading(int dim, Head h) {
    if (dim < 1) throw std::invalid_argument("vector map dimension must be >= 1");
    VectorMap m(dim, true);
    m.heads_.push_back(std::move(h));
    return m;
}

VectorMap VectorMap::additive(int dim, Head h) {
    if (dim < 1) throw std::invalid_argument("vector map dimension must be >= 1");
    VectorMap m(dim, false);
    m.heads_.push_back(std::move(h));
    return m;
}

double VectorMap::head(std::span<const double> state) const {
    double acc = 0.0;
    bool first = true;
    for (const auto& h : heads_) {
        double v = h(state);
        if (first) {
            acc = v;
            first = false;
        } else {
            acc += v;
        }
    }
    return acc;
}

std::vector<double> VectorMap::apply(std::span<const double> state, int step) const {
    (void)step;
    return apply(state);
}

std::vector<double> VectorMap::apply(std::span<const double> state) const {
    if (static_cast<int>(state.size()) != dim_) {
        throw std::invalid_argument("state size " + std::to_string(state.size()) +
                                    " does not match map dimension " + std::to_string(dim_));
    }
    std::vector<double> out(static_cast<std::size_t>(dim_), 0.0);
    out[0] = head(state);
    if (shift_tail_) {
        for (int i = 1; i < dim_; ++i) {
            out[static_cast<std::size_t>(i)] = state[static_cast<std::size_t>(i - 1)];
        }
    }
    return out;
}

VectorMap operator+(const VectorMap& a, const VectorMap& b) {
    if (a.dim_ != b.dim_) {
        throw std::invalid_argument("cannot add vector maps of dimensions " +
                                    std::to_string(a.dim_) + " and " + std::to_string(b.dim_));
    }
    if (a.shift_tail_ && b.shift_tail_) {
        throw std::invalid_argument("cannot add two vector maps that both carry the shift tail");
    }
    VectorMap out(a.dim_, a.shift_tail_ || b.shift_tail_);
    out.heads_ = a.heads_;
    out.heads_.insert(out.heads_.end(), b.heads_.begin(), b.heads_.end());
    return out;
}

namespace {

VectorMap lift(const ComponentMap& c, int m, bool lead) {
    if (m < c.order()) {
        throw std::invalid_argument(std::string("cannot lift ") + component_name(c.label) +
                                    " of order " + std::to_string(c.order()) +
                                    " to smaller dimension " + std::to_string(m));
    }
    LaggedExpr body = c.body;
    auto h = [body](std::span<const double> state) { return body.evaluate(state); };
    return lead ? VectorMap::leading(m, std::move(h)) : VectorMap::additive(m, std::move(h));
}

}  // namespace

VectorMap lift_leading(const ComponentMap& c, int m) { return lift(c, m, true); }

VectorMap lift_additive(const ComponentMap& c, int m) { return lift(c, m, false); }

VectorMap associate_map(const SystemBundle& b, ComponentSet s, int m) {
    int needed = b.order(s);
    if (needed == 0) {
        throw std::invalid_argument("cannot build a vector map from an empty component selection");
    }
    if (m < needed) {
        throw std::invalid_argument("requested dimension " + std::to_string(m) +
                                    " is below the subsystem order " + std::to_string(needed));
    }
    std::optional<VectorMap> acc;
    bool first = true;
    for (Component c : {Component::F, Component::FIncr, Component::G, Component::GIncr}) {
        if (!s.contains(c) || !b.has(c)) continue;
        VectorMap part = first ? lift_leading(*b.component(c), m)
                               : lift_additive(*b.component(c), m);
        acc = acc ? (*acc + part) : part;
        first = false;
    }
    return *acc;
}

VectorMap associate_map(const SystemBundle& b, ComponentSet s) {
    return associate_map(b, s, b.order(s));
}

VectorMap associate_map(const SystemBundle& b, Variant v) {
    return associate_map(b, components_of(v));
}

std::vector<double> Trajectory::scalars() const {
    std::vector<double> out;
    out.reserve(states.size());
    for (const auto& x : states) out.push_back(x.empty() ? 0.0 : x[0]);
    return out;
}

Trajectory iterate(const VectorMap& map, std::span<const double> x0, int steps) {
    if (static_cast<int>(x0.size()) != map.dimension()) {
        throw std::invalid_argument("initial state size does not match map dimension");
    }
    Trajectory t;
    t.initial_history.assign(x0.begin(), x0.end());
    t.states.emplace_back(x0.begin(), x0.end());
    for (int n = 0; n < steps; ++n) {
        try {
            std::vector<double> next = map.apply(t.states.back(), n + 1);
            if (!std::isfinite(next[0])) {
                t.truncated = true;
                t.truncation_reason = "step " + std::to_string(n + 1) + ": diverged-nonfinite";
                break;
            }
            t.states.push_back(std::move(next));
        } catch (const EvalError& e) {
            t.truncated = true;
            t.truncation_reason = "step " + std::to_string(n + 1) + ": " +
                                  (e.kind() == EvalError::Kind::NonFinite
                                       ? "diverged-nonfinite (" + std::string(e.what()) + ")"
                                       : std::string(e.what()));
            break;
        }
    }
    return t;
}

namespace {

ScalarRun scalar_run_impl(const SystemBundle& b, ComponentSet s, std::span<const double> history,
                          int steps) {
    int m = b.order(s);
    if (static_cast<int>(history.size()) < m) {
        throw std::invalid_argument("history length " + std::to_string(history.size()) +
                                    " is below the subsystem order " + std::to_string(m));
    }
    std::vector<double> window(history.begin(), history.begin() + m);
    ScalarRun run;
    run.values.reserve(static_cast<std::size_t>(steps));
    for (int n = 0; n < steps; ++n) {
        double next;
        try {
            next = b.scalar_sum(s, window, n + 1);
        } catch (const EvalError& e) {
            run.truncated = true;
            run.truncation_reason = "step " + std::to_string(n + 1) + ": " +
                                    (e.kind() == EvalError::Kind::NonFinite
                                         ? "diverged-nonfinite (" + std::string(e.what()) + ")"
                                         : std::string(e.what()));
            break;
        }
        if (!std::isfinite(next)) {
            run.truncated = true;
            run.truncation_reason = "step " + std::to_string(n + 1) + ": diverged-nonfinite";
            break;
        }
        run.values.push_back(next);
        if (m > 1) {
            std::rotate(window.rbegin(), window.rbegin() + 1, window.rend());
        }
        window[0] = next;
    }
    return run;
}

}  // namespace

ScalarRun scalar_run(const SystemBundle& b, ComponentSet s, std::span<const double> history,
                     int steps) {
    return scalar_run_impl(b, s, history, steps);
}

ScalarRun scalar_run(const SystemBundle& b, Variant v, std::span<const double> history,
                     int steps) {
    return scalar_run_impl(b, components_of(v), history, steps);
}

}  // namespace stabkit
