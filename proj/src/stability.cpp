#include "stabkit/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
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

/// 53-bit uniform in [0, 1)
double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<double> ScalarSystem::apply(std::span<const double> state) const {
    std::vector<double> next(state.size());
    next[0] = head(state);
    for (std::size_t i = 1; i < state.size(); ++i) next[i] = state[i - 1];
    return next;
}

int RegionSpec::dimension() const { return static_cast<int>(center.size()); }

double RegionSpec::extent() const {
    if (shape == RegionShape::Ball) return radius;
    double half = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        half = std::max(half, 0.5 * (hi[i] - lo[i]));
    }
    return half;
}

double RegionSpec::effective_r_excl() const {
    return r_excl >= 0.0 ? r_excl : 1e-6 * extent();
}

std::vector<double> RegionSpec::reference_point() const {
    return reference.empty() ? center : reference;
}

void validate_region(const RegionSpec& s) {
    if (s.center.empty()) throw std::invalid_argument("region center is empty");
    if (s.shape == RegionShape::Ball) {
        if (!(s.radius > 0.0)) throw std::invalid_argument("region radius must be positive");
    } else {
        if (s.lo.size() != s.center.size() || s.hi.size() != s.center.size()) {
            throw std::invalid_argument("box bounds must match the center dimension");
        }
        for (std::size_t i = 0; i < s.lo.size(); ++i) {
            if (!(s.lo[i] < s.hi[i])) {
                throw std::invalid_argument("box bounds must satisfy lo < hi per coordinate");
            }
        }
    }
    if (s.sample_count < 1) throw std::invalid_argument("sample_count must be at least 1");
    double re = s.effective_r_excl();
    if (!(re >= 0.0) || re >= s.extent()) {
        throw std::invalid_argument("exclusion radius must satisfy 0 <= r_excl < region extent");
    }
    if (!s.reference.empty() && s.reference.size() != s.center.size()) {
        throw std::invalid_argument("reference point must match the center dimension");
    }
}

bool region_contains(const RegionSpec& s, std::span<const double> state) {
    if (static_cast<int>(state.size()) != s.dimension()) return false;
    if (s.shape == RegionShape::Ball) {
        double center_mag = 0.0;
        for (double c : s.center) center_mag = std::max(center_mag, std::fabs(c));
        double slack = 1e-12 * (s.radius + center_mag);
        return dist_inf(state, s.center) <= s.radius + slack;
    }
    for (std::size_t i = 0; i < state.size(); ++i) {
        double slack = 1e-12 * (std::fabs(s.lo[i]) + std::fabs(s.hi[i]) + 1.0);
        if (state[i] < s.lo[i] - slack || state[i] > s.hi[i] + slack) return false;
    }
    return true;
}

std::vector<std::vector<double>> sample_region(const RegionSpec& s) {
    validate_region(s);
    int m = s.dimension();
    double re = s.effective_r_excl();
    std::vector<double> ref = s.reference_point();
    std::vector<std::vector<double>> out;

    auto excluded = [&](const std::vector<double>& x) { return dist_inf(x, ref) < re; };

    std::vector<double> face_base;
    if (s.shape == RegionShape::Ball) {
        face_base = s.center;
    } else {
        face_base.resize(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            face_base[static_cast<std::size_t>(j)] =
                0.5 * (s.lo[static_cast<std::size_t>(j)] + s.hi[static_cast<std::size_t>(j)]);
        }
    }
    for (int j = 0; j < m; ++j) {
        for (int side = 0; side < 2; ++side) {
            std::vector<double> probe = face_base;
            if (s.shape == RegionShape::Ball) {
                probe[static_cast<std::size_t>(j)] =
                    s.center[static_cast<std::size_t>(j)] + (side == 0 ? -s.radius : s.radius);
            } else {
                probe[static_cast<std::size_t>(j)] = side == 0 ? s.lo[static_cast<std::size_t>(j)]
                                                               : s.hi[static_cast<std::size_t>(j)];
            }
            if (!excluded(probe)) out.push_back(std::move(probe));
        }
    }

    std::mt19937_64 rng(s.rng_seed);
    int drawn = 0;
    // rejection sampling against the exclusion ball; r_excl < extent keeps
    // the acceptance probability bounded away from zero
    while (drawn < s.sample_count) {
        std::vector<double> x(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            double u = next_unit(rng);
            if (s.shape == RegionShape::Ball) {
                x[static_cast<std::size_t>(j)] =
                    s.center[static_cast<std::size_t>(j)] + (2.0 * u - 1.0) * s.radius;
            } else {
                x[static_cast<std::size_t>(j)] =
                    s.lo[static_cast<std::size_t>(j)] +
                    u * (s.hi[static_cast<std::size_t>(j)] - s.lo[static_cast<std::size_t>(j)]);
            }
        }
        if (excluded(x)) continue;
        out.push_back(std::move(x));
        ++drawn;
    }
    return out;
}

namespace {

GrowthCertificate certificate_core(const std::function<double(std::span<const double>)>& head,
                                   int m, double x_bar, const RegionSpec& S,
                                   const std::optional<InflationFactors>& inflation) {
    if (S.dimension() != m) {
        throw std::invalid_argument("region dimension does not match the subsystem order");
    }
    RegionSpec spec = S;
    spec.reference = std::vector<double>(static_cast<std::size_t>(m), x_bar);
    if (!(spec.effective_r_excl() > 0.0)) {
        throw std::invalid_argument("growth ratios need a positive exclusion radius");
    }

    GrowthCertificate cert;
    cert.equilibrium = spec.reference;
    double alpha = std::numeric_limits<double>::infinity();
    double beta = -1.0;
    for (const auto& X : sample_region(spec)) {
        double denom = dist_inf(X, cert.equilibrium);
        if (denom == 0.0) {
            ++cert.skipped;
            continue;
        }
        double val;
        try {
            val = head(X);
        } catch (const EvalError&) {
            ++cert.skipped;
            continue;
        }
        double ratio = std::fabs(val - x_bar) / denom;
        ++cert.sample_total;
        if (ratio < alpha) {
            alpha = ratio;
            cert.argmin = {X, val, ratio};
        }
        if (ratio > beta) {
            beta = ratio;
            cert.argmax = {X, val, ratio};
        }
    }
    if (cert.sample_total == 0) {
        throw std::runtime_error("growth certificate: every sample was skipped");
    }
    cert.alpha = alpha;
    cert.beta = beta;

    if (inflation) {
        cert.alpha_inflated = cert.alpha * (1.0 - inflation->alpha_tilde);
        cert.beta_inflated = cert.beta * (1.0 + inflation->beta_tilde);
        bool alpha_ok = inflation->alpha_tilde <= 1.0;
        bool beta_ok = cert.beta == 0.0 || inflation->beta_tilde < 1.0 / cert.beta - 1.0;
        cert.inflation_valid = alpha_ok && beta_ok;
        if (!alpha_ok) {
            cert.inflation_note = "alpha_tilde exceeds 1";
        } else if (!beta_ok) {
            cert.inflation_note = "beta_tilde must stay below 1/beta - 1";
        } else {
            cert.inflation_note = "admissible";
        }
    }
    return cert;
}

}  // namespace

GrowthCertificate growth_certificate(const SystemBundle& b, ComponentSet set, double x_bar,
                                     const RegionSpec& S,
                                     std::optional<InflationFactors> inflation) {
    int m = std::max(1, b.order(set));
    GrowthCertificate cert = certificate_core(
        [&b, set](std::span<const double> X) { return b.scalar_sum(set, X); }, m, x_bar, S,
        inflation);
    cert.set = set;
    cert.label = set_label(set);
    return cert;
}

GrowthCertificate growth_certificate(const SystemBundle& b, Variant v, double x_bar,
                                     const RegionSpec& S,
                                     std::optional<InflationFactors> inflation) {
    return growth_certificate(b, components_of(v), x_bar, S, inflation);
}

GrowthCertificate growth_certificate(const ScalarSystem& sys, double x_bar, const RegionSpec& S,
                                     std::optional<InflationFactors> inflation, std::string label) {
    GrowthCertificate cert = certificate_core(sys.head, sys.dimension, x_bar, S, inflation);
    cert.label = std::move(label);
    return cert;
}

namespace {

using ApplyFn = std::function<std::vector<double>(std::span<const double>)>;

InvarianceResult invariance_core(const ApplyFn& apply, int dim, const RegionSpec& S) {
    if (S.dimension() != dim) {
        throw std::invalid_argument("region dimension does not match the map dimension");
    }
    InvarianceResult res;
    res.pass = true;
    for (const auto& X : sample_region(S)) {
        std::vector<double> image;
        try {
            image = apply(X);
        } catch (const EvalError&) {
            res.pass = false;
            res.witness = RegionWitness{X, {}};
            return res;
        }
        ++res.checked;
        if (!region_contains(S, image)) {
            res.pass = false;
            res.witness = RegionWitness{X, image};
            return res;
        }
    }
    return res;
}

}  // namespace

InvarianceResult check_invariance(const VectorMap& map, const RegionSpec& S) {
    return invariance_core([&map](std::span<const double> X) { return map.apply(X); },
                           map.dimension(), S);
}

InvarianceResult check_invariance(const ScalarSystem& sys, const RegionSpec& S) {
    return invariance_core([&sys](std::span<const double> X) { return sys.apply(X); },
                           sys.dimension, S);
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::AsymptoticallyStable: return "asymptoticallyStable";
        case Verdict::Unstable: return "unstable";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

ContractionTrace trace_core(const ApplyFn& apply, int dim, std::span<const double> x_bar,
                            std::span<const double> x0, int steps) {
    if (static_cast<int>(x_bar.size()) != dim || static_cast<int>(x0.size()) != dim) {
        throw std::invalid_argument("state dimensions do not match the map");
    }
    double d0 = dist_inf(x0, x_bar);
    if (d0 == 0.0) {
        throw std::invalid_argument("trace start must differ from the equilibrium");
    }
    ContractionTrace tr;
    std::vector<double> state(x0.begin(), x0.end());
    for (int n = 1; n <= steps; ++n) {
        bool ok = true;
        try {
            state = apply(state);
        } catch (const EvalError& e) {
            tr.truncated = true;
            tr.truncation_reason =
                e.kind() == EvalError::Kind::NonFinite
                    ? "step " + std::to_string(n) + ": diverged-nonfinite (" + e.what() + ")"
                    : "step " + std::to_string(n) + ": " + e.what();
            ok = false;
        }
        if (ok) {
            double d = dist_inf(state, x_bar);
            if (!std::isfinite(d)) {
                tr.truncated = true;
                tr.truncation_reason = "step " + std::to_string(n) + ": diverged-nonfinite";
                ok = false;
            } else {
                tr.ratios.push_back(d / d0);
            }
        }
        if (!ok) {
            tr.expanding = true;
            break;
        }
    }
    if (!tr.ratios.empty()) {
        tr.fitted_rate =
            std::pow(tr.ratios.back(), 1.0 / static_cast<double>(tr.ratios.size()));
        if (tr.fitted_rate > 1.0) tr.expanding = true;
    } else if (tr.truncated) {
        tr.fitted_rate = std::numeric_limits<double>::infinity();
    }
    return tr;
}

}  // namespace

ContractionTrace contraction_trace(const VectorMap& map, std::span<const double> x_bar,
                                   std::span<const double> x0, int steps) {
    return trace_core([&map](std::span<const double> X) { return map.apply(X); },
                      map.dimension(), x_bar, x0, steps);
}

ContractionTrace contraction_trace(const ScalarSystem& sys, std::span<const double> x_bar,
                                   std::span<const double> x0, int steps) {
    return trace_core([&sys](std::span<const double> X) { return sys.apply(X); }, sys.dimension,
                      x_bar, x0, steps);
}

Verdict side_verdict(const GrowthCertificate& cert, const InvarianceResult& inv) {
    if (cert.beta < 1.0 && inv.pass) return Verdict::AsymptoticallyStable;
    if (cert.alpha > 1.0) return Verdict::Unstable;
    return Verdict::Inconclusive;
}

const char* classify_case_name(ClassifyCase c) {
    switch (c) {
        case ClassifyCase::NominalVsControlled: return "nominal_vs_controlled";
        case ClassifyCase::PerturbedVsControlledPerturbed:
            return "perturbed_vs_controlled_perturbed";
        case ClassifyCase::PerturbedVsFull: return "perturbed_vs_full";
    }
    return "?";
}

std::pair<ComponentSet, ComponentSet> classify_case_sets(ClassifyCase c) {
    ComponentSet nominal = components_of(Variant::Nominal);
    ComponentSet perturbed = components_of(Variant::Perturbed);
    switch (c) {
        case ClassifyCase::NominalVsControlled:
            return {nominal, components_of(Variant::Controlled)};
        case ClassifyCase::PerturbedVsControlledPerturbed:
            return {perturbed, perturbed.with(Component::G)};
        case ClassifyCase::PerturbedVsFull:
            return {perturbed, components_of(Variant::ControlledPerturbed)};
    }
    return {nominal, nominal};
}

namespace {

SideVerdict certify_side(const SystemBundle& b, ComponentSet set, double x_bar,
                         const RegionSpec& S, int m) {
    SideVerdict side;
    side.certificate = growth_certificate(b, set, x_bar, S);
    VectorMap map = associate_map(b, set, m);
    side.invariance = check_invariance(map, S);
    side.verdict = side_verdict(side.certificate, side.invariance);

    std::vector<double> x_bar_vec(static_cast<std::size_t>(m), x_bar);
    auto samples = sample_region(S);
    int traces = std::min<int>(4, static_cast<int>(samples.size()));
    for (int i = 0; i < traces; ++i) {
        if (dist_inf(samples[static_cast<std::size_t>(i)], x_bar_vec) == 0.0) continue;
        side.traces.push_back(
            contraction_trace(map, x_bar_vec, samples[static_cast<std::size_t>(i)], 32));
    }
    return side;
}

}  // namespace

ClassifyResult classify(const SystemBundle& b, ComponentSet uncontrolled, double x_bar_u,
                        ComponentSet controlled, double x_bar_c, const RegionSpec& S) {
    int mu = std::max(1, b.order(uncontrolled));
    int mc = std::max(1, b.order(controlled));
    if (mu != mc) {
        throw std::invalid_argument("comparison sides have different orders (" +
                                    std::to_string(mu) + " vs " + std::to_string(mc) + ")");
    }
    if (S.dimension() != mu) {
        throw std::invalid_argument("region dimension does not match the comparison order");
    }
    ClassifyResult res;
    res.uncontrolled = certify_side(b, uncontrolled, x_bar_u, S, mu);
    res.controlled = certify_side(b, controlled, x_bar_c, S, mc);
    return res;
}

ClassifyResult classify(const SystemBundle& b, ClassifyCase c, double x_bar_u, double x_bar_c,
                        const RegionSpec& S) {
    auto [u, ctl] = classify_case_sets(c);
    return classify(b, u, x_bar_u, ctl, x_bar_c, S);
}

}  // namespace stabkit
