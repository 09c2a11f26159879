#include "stabkit/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stabkit/expr.hpp"

namespace stabkit {

namespace {

double dist_inf(std::span<const double> a, std::span<const double> b) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        best = std::max(best, std::fabs(a[i] - b[i]));
    }
    return best;
}

void validate_schedule(const SystemBundle& b, const GainSchedule& s) {
    if (!b.has(Component::F)) {
        throw HypothesisError("gain synthesis needs the nominal component present");
    }
    if (s.sigma < 0 || s.sigma_tilde < 0) {
        throw HypothesisError("delays must be nonnegative");
    }
    if (!(s.gamma >= 0.0 && s.gamma <= 1.0)) {
        throw HypothesisError("gain fraction must lie in [0, 1]");
    }
    if (!(s.denom_tol > 0.0)) {
        throw HypothesisError("denominator tolerance must be positive");
    }
}

/// Left fold over the perturbed pair, matching scalar_sum term for term so a
/// zero-gain loop is bit-identical to the open-loop run.
double perturbed_head(const SystemBundle& b, const GainStep& gs) {
    double value = gs.f_cur;
    if (b.has(Component::FIncr)) value += gs.f_incr_cur;
    return value;
}

double loop_value(const SystemBundle& b, const GainStep& gs) {
    double value = perturbed_head(b, gs);
    if (gs.lambda != 0.0) value += gs.lambda * gs.f_delayed;
    if (gs.lambda_tilde != 0.0) value += gs.lambda_tilde * gs.f_incr_delayed;
    return value;
}

double signed_gain(double magnitude, double product) {
    if (product > 0.0) return -magnitude;
    if (product < 0.0) return magnitude;
    return 0.0;  // sign(0) is matched by a zero gain
}

}  // namespace

const char* control_mode_name(ControlMode m) {
    switch (m) {
        case ControlMode::Combined: return "combined";
        case ControlMode::NominalOnly: return "nominalOnly";
    }
    return "?";
}

ClosedLoop::ClosedLoop(const SystemBundle& bundle, GainSchedule schedule)
    : bundle_(bundle), schedule_(schedule) {
    validate_schedule(bundle_, schedule_);
    order_ = std::max(1, bundle_.order(Variant::Perturbed));
    window_ = order_ + std::max(schedule_.sigma, schedule_.sigma_tilde);
}

GainStep ClosedLoop::gains_at(std::span<const double> window) const {
    if (static_cast<int>(window.size()) != window_) {
        throw std::invalid_argument("closed-loop window needs " + std::to_string(window_) +
                                    " entries, got " + std::to_string(window.size()));
    }
    const auto m = static_cast<std::size_t>(order_);
    auto cur = window.first(m);
    auto delayed_f = window.subspan(static_cast<std::size_t>(schedule_.sigma), m);
    auto delayed_fi = window.subspan(static_cast<std::size_t>(schedule_.sigma_tilde), m);

    bool has_incr = bundle_.has(Component::FIncr);
    GainStep gs;
    gs.f_cur = bundle_.component_value(Component::F, cur);
    gs.f_incr_cur = has_incr ? bundle_.component_value(Component::FIncr, cur) : 0.0;
    gs.f_delayed = bundle_.component_value(Component::F, delayed_f);
    gs.f_incr_delayed = has_incr ? bundle_.component_value(Component::FIncr, delayed_fi) : 0.0;

    if (schedule_.mode == ControlMode::Combined) {
        double denom = std::hypot(gs.f_delayed, gs.f_incr_delayed);
        if (denom < schedule_.denom_tol) {
            gs.degenerate = true;
            return gs;
        }
        double head = perturbed_head(bundle_, gs);
        // ratio-first keeps unit quotients exact, so gamma = 1 cancels fully
        double pair = schedule_.gamma * (std::fabs(head - schedule_.x_bar_target) / denom);
        gs.magnitude_target = pair;
        double abs_l = pair * (std::fabs(gs.f_delayed) / denom);
        double abs_lt = pair * (std::fabs(gs.f_incr_delayed) / denom);
        gs.lambda = signed_gain(abs_l, (gs.f_cur - schedule_.x_bar_open) * gs.f_delayed);
        gs.lambda_tilde =
            signed_gain(abs_lt, (gs.f_incr_cur - schedule_.x_bar_open) * gs.f_incr_delayed);
    } else {
        double denom = std::fabs(gs.f_delayed);
        if (denom < schedule_.denom_tol) {
            gs.degenerate = true;
            return gs;
        }
        double target =
            schedule_.gamma *
            (std::fabs(gs.f_cur - schedule_.x_bar_target + schedule_.a) / denom);
        gs.magnitude_target = target;
        gs.lambda = signed_gain(target, (gs.f_cur - schedule_.x_bar_open) * gs.f_delayed);
    }
    return gs;
}

double ClosedLoop::step(std::span<const double> window) const {
    return loop_value(bundle_, gains_at(window));
}

ScalarSystem ClosedLoop::as_scalar_system() const {
    ScalarSystem ss;
    ss.dimension = window_;
    ss.head = [loop = *this](std::span<const double> w) { return loop.step(w); };
    return ss;
}

GainSchedule synthesize_combined(const SystemBundle& b, double x_bar_open, double x_bar_closed,
                                 int sigma, int sigma_tilde, double gamma, double denom_tol) {
    GainSchedule s;
    s.mode = ControlMode::Combined;
    s.sigma = sigma;
    s.sigma_tilde = sigma_tilde;
    s.gamma = gamma;
    s.denom_tol = denom_tol;
    s.x_bar_open = x_bar_open;
    s.x_bar_target = x_bar_closed;
    validate_schedule(b, s);
    return s;
}

GainSchedule synthesize_nominal_only(const SystemBundle& b, double x_bar_open,
                                     double x_bar_closed, int sigma, double gamma,
                                     std::optional<double> a, std::optional<double> b_offset,
                                     double denom_tol) {
    GainSchedule s;
    s.mode = ControlMode::NominalOnly;
    s.sigma = sigma;
    s.sigma_tilde = 0;
    s.gamma = gamma;
    s.denom_tol = denom_tol;
    s.x_bar_open = x_bar_open;
    s.x_bar_target = x_bar_closed;
    validate_schedule(b, s);

    auto incr_at = [&](double center) {
        if (!b.has(Component::FIncr)) return 0.0;
        int m = std::max(1, b.order(Variant::Perturbed));
        std::vector<double> window(static_cast<std::size_t>(m), center);
        return b.component_value(Component::FIncr, window);
    };
    s.a = a ? *a : incr_at(x_bar_closed);
    s.b = b_offset ? *b_offset : incr_at(x_bar_open);
    return s;
}

ClosedLoop close_loop(const SystemBundle& b, const GainSchedule& schedule) {
    return ClosedLoop(b, schedule);
}

SimulationResult simulate(const ClosedLoop& loop, std::span<const double> history, int steps) {
    int w = loop.window_size();
    if (static_cast<int>(history.size()) < w) {
        throw std::invalid_argument("initial history length " + std::to_string(history.size()) +
                                    " is below the closed-loop window " + std::to_string(w));
    }
    std::vector<double> window(history.begin(), history.begin() + w);

    SimulationResult res;
    res.values.reserve(static_cast<std::size_t>(steps));
    for (int n = 1; n <= steps; ++n) {
        GainStep gs;
        try {
            gs = loop.gains_at(window);
        } catch (const EvalError& e) {
            res.truncated = true;
            res.truncation_reason = "step " + std::to_string(n) + ": " +
                                    (e.kind() == EvalError::Kind::NonFinite
                                         ? "diverged-nonfinite (" + std::string(e.what()) + ")"
                                         : std::string(e.what()));
            break;
        }
        double value = loop_value(loop.bundle(), gs);
        if (!std::isfinite(value)) {
            res.truncated = true;
            res.truncation_reason = "step " + std::to_string(n) + ": diverged-nonfinite";
            break;
        }
        gs.n = n;
        gs.window = window;
        res.steps.push_back(std::move(gs));
        res.values.push_back(value);
        std::rotate(window.rbegin(), window.rbegin() + 1, window.rend());
        window[0] = value;
    }
    return res;
}

GainAudit audit_gains(const ClosedLoop& loop, std::span<const GainStep> steps, double tol) {
    const GainSchedule& s = loop.schedule();
    GainAudit audit;
    for (const GainStep& gs : steps) {
        ++audit.replayed;
        GainStep replay = loop.gains_at(gs.window);
        if (replay.lambda != gs.lambda || replay.lambda_tilde != gs.lambda_tilde) {
            ++audit.replay_mismatches;
        }

        // A gain pushing with its sign product violates the sign rule; zero
        // gains never do.
        if (gs.lambda * ((gs.f_cur - s.x_bar_open) * gs.f_delayed) > 0.0) {
            ++audit.sign_violations;
        }
        if (s.mode == ControlMode::Combined &&
            gs.lambda_tilde * ((gs.f_incr_cur - s.x_bar_open) * gs.f_incr_delayed) > 0.0) {
            ++audit.sign_violations;
        }

        double realized = s.mode == ControlMode::Combined
                              ? std::hypot(gs.lambda, gs.lambda_tilde)
                              : std::fabs(gs.lambda);
        double target = gs.degenerate ? 0.0 : gs.magnitude_target;
        if (std::fabs(realized - target) > tol * std::max(1.0, target)) {
            ++audit.magnitude_violations;
        }
    }
    return audit;
}

EquilibriumResolution resolve_closed_equilibrium(const SystemBundle& b, GainSchedule seed,
                                                 const SolveOptions& solve, double tol,
                                                 int max_rounds) {
    validate_schedule(b, seed);
    EquilibriumResolution res;
    double x = seed.x_bar_open;
    GainSchedule sched = seed;
    for (int round = 1; round <= max_rounds; ++round) {
        sched.x_bar_target = x;
        ClosedLoop loop(b, sched);
        std::vector<double> window(static_cast<std::size_t>(loop.window_size()));
        auto psi = [&](double v) {
            std::fill(window.begin(), window.end(), v);
            return loop.step(window) - v;
        };
        std::vector<double> roots = find_roots(psi, solve);
        res.rounds = round;
        if (roots.empty()) break;
        double best = roots.front();
        for (double r : roots) {
            if (std::fabs(r - x) < std::fabs(best - x)) best = r;
        }
        double moved = std::fabs(best - x);
        x = best;
        if (moved < tol) {
            res.converged = true;
            break;
        }
    }
    sched.x_bar_target = x;
    res.schedule = sched;
    res.x_bar = x;
    ClosedLoop final_loop(b, sched);
    std::vector<double> window(static_cast<std::size_t>(final_loop.window_size()), x);
    res.residual = std::fabs(final_loop.step(window) - x);
    return res;
}

SmallnessReport verify_smallness(const SystemBundle& b, double x_bar_closed, double x_bar_open,
                                 const RegionSpec& S, double a, double b_offset, double beta,
                                 double alpha) {
    validate_region(S);
    if (b.has(Component::FIncr) &&
        S.dimension() < b.order(ComponentSet{}.with(Component::FIncr))) {
        throw std::invalid_argument("region dimension is below the increment order");
    }
    const auto m = static_cast<std::size_t>(S.dimension());
    std::vector<double> center_closed(m, x_bar_closed);
    std::vector<double> center_open(m, x_bar_open);
    double r = S.effective_r_excl();

    SmallnessReport rep;
    // num == 0 contributes 0 even at a zero denominator; otherwise a zero
    // denominator escalates the quotient to infinity, as it should.
    auto quotient = [](double num, double den) {
        return num == 0.0 ? 0.0 : num / den;
    };
    for (const auto& X : sample_region(S)) {
        double val;
        try {
            val = b.has(Component::FIncr) ? b.component_value(Component::FIncr, X) : 0.0;
        } catch (const EvalError&) {
            continue;
        }
        double d_closed = dist_inf(X, center_closed);
        if (d_closed >= r) {
            rep.beta_tilde_min =
                std::max(rep.beta_tilde_min, quotient(std::fabs(val - a), beta * d_closed));
            ++rep.beta_samples;
        }
        double d_open = dist_inf(X, center_open);
        if (d_open >= r) {
            rep.alpha_tilde_min =
                std::max(rep.alpha_tilde_min, quotient(std::fabs(val - b_offset), alpha * d_open));
            ++rep.alpha_samples;
        }
    }
    rep.admissible = rep.alpha_tilde_min <= 1.0 && rep.beta_tilde_min < 1.0 / beta - 1.0;
    return rep;
}

ShiftBoundReport verify_shift_bound(double shift, double alpha, double beta, const RegionSpec& S,
                                    double r_excl) {
    ShiftBoundReport rep;
    if (!(alpha > beta && beta > 0.0)) {
        rep.note = "requires alpha > beta > 0; the bound leaves no admissible shift";
        return rep;
    }
    RegionSpec spec = S;
    spec.r_excl = r_excl;
    validate_region(spec);
    std::vector<double> ref = spec.reference_point();

    double min_dist = std::numeric_limits<double>::infinity();
    for (const auto& X : sample_region(spec)) {
        double d = dist_inf(X, ref);
        if (d >= r_excl) min_dist = std::min(min_dist, d);
    }
    if (!std::isfinite(min_dist)) {
        rep.note = "every sample fell inside the exclusion radius";
        return rep;
    }
    rep.min_distance = min_dist;
    rep.threshold = (alpha - beta) / beta * min_dist;
    rep.margin = rep.threshold - std::fabs(shift);
    rep.ok = std::fabs(shift) <= rep.threshold;
    rep.strict_forces_zero = region_contains(spec, ref);
    rep.note = rep.strict_forces_zero
                   ? "reference lies in the region, so the untruncated infimum is zero and the "
                     "strict reading admits only a zero shift; threshold uses the truncated "
                     "infimum"
                   : "threshold uses the sampled infimum";
    return rep;
}

}  // namespace stabkit
