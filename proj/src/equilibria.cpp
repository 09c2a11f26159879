#include "stabkit/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stabkit {

namespace {

/// ψ(x) = h(x, ..., x) − x for the selected subsystem.
double psi(const SystemBundle& b, ComponentSet s, int m, double x) {
    std::vector<double> window(static_cast<std::size_t>(m), x);
    return b.scalar_sum(s, window) - x;
}

}  // namespace

std::vector<double> find_roots(const std::function<double(double)>& psi_fn,
                               const SolveOptions& opts) {
    if (opts.lo >= opts.hi) {
        throw std::invalid_argument("scan interval is empty: lo must be below hi");
    }
    if (opts.grid < 2) {
        throw std::invalid_argument("scan grid must have at least 2 subintervals");
    }

    std::vector<double> roots;

    double prev_x = opts.lo;
    double prev_psi = psi_fn(prev_x);
    if (std::fabs(prev_psi) <= opts.tol) roots.push_back(prev_x);
    for (int i = 1; i <= opts.grid; ++i) {
        double cur_x = opts.lo + (opts.hi - opts.lo) * i / opts.grid;
        double cur_psi = psi_fn(cur_x);
        if (std::fabs(cur_psi) <= opts.tol) {
            roots.push_back(cur_x);
        } else if (prev_psi != 0.0 && std::signbit(prev_psi) != std::signbit(cur_psi) &&
                   std::fabs(prev_psi) > opts.tol) {
            // Bisect the bracketing subinterval down to tolerance.
            double a = prev_x, fa = prev_psi;
            double c = cur_x;
            double mid = a;
            for (int iter = 0; iter < 200; ++iter) {
                mid = 0.5 * (a + c);
                double fm = psi_fn(mid);
                if (std::fabs(fm) <= opts.tol || mid == a || mid == c) break;
                if (std::signbit(fm) == std::signbit(fa)) {
                    a = mid;
                    fa = fm;
                } else {
                    c = mid;
                }
            }
            roots.push_back(mid);
        }
        prev_x = cur_x;
        prev_psi = cur_psi;
    }

    std::sort(roots.begin(), roots.end());
    std::vector<double> merged;
    for (double r : roots) {
        if (!merged.empty() && std::fabs(r - merged.back()) <= 10.0 * opts.tol) continue;
        merged.push_back(r);
    }
    return merged;
}

std::vector<EquilibriumPoint> find_equilibria(const SystemBundle& b, ComponentSet s,
                                              const SolveOptions& opts) {
    int m = std::max(1, b.order(s));
    auto eval = [&](double x) { return psi(b, s, m, x); };

    std::vector<EquilibriumPoint> out;
    for (double r : find_roots(eval, opts)) {
        EquilibriumPoint p;
        p.x = r;
        p.set = s;
        p.residual = std::fabs(eval(r));
        out.push_back(p);
    }
    return out;
}

std::vector<EquilibriumPoint> find_equilibria(const SystemBundle& b, Variant v,
                                              const SolveOptions& opts) {
    return find_equilibria(b, components_of(v), opts);
}

ResidualCheck check_equilibrium(const SystemBundle& b, ComponentSet s, double x, double tol) {
    int m = std::max(1, b.order(s));
    double r = std::fabs(psi(b, s, m, x));
    return {r <= tol, r};
}

ResidualCheck check_equilibrium(const SystemBundle& b, Variant v, double x, double tol) {
    return check_equilibrium(b, components_of(v), x, tol);
}

std::optional<OscillationPattern> detect_oscillation(const VectorMap& map, const Trajectory& traj,
                                                     int max_period, int tail_window, double tol) {
    if (max_period < 1 || tail_window < 2 * max_period) {
        throw std::invalid_argument("need tail_window >= 2*max_period and max_period >= 1");
    }
    std::vector<double> s = traj.scalars();
    int n_samples = static_cast<int>(s.size());
    if (n_samples < tail_window + max_period) {
        throw std::invalid_argument("trajectory holds " + std::to_string(n_samples) +
                                    " samples; need at least tail_window + max_period = " +
                                    std::to_string(tail_window + max_period));
    }
    int last = n_samples - 1;
    for (int p = 1; p <= max_period; ++p) {
        bool match = true;
        for (int k = 0; k < tail_window; ++k) {
            int n = last - k;
            if (std::fabs(s[static_cast<std::size_t>(n)] - s[static_cast<std::size_t>(n - p)]) >
                tol) {
                match = false;
                break;
            }
        }
        if (!match) continue;

        OscillationPattern pat;
        pat.period = p;
        pat.values.assign(s.begin() + (last - p + 1), s.end());

        // Replay: seed the state from the pattern's own backwards
        // periodic extension and run one full period through the map.
        int m = map.dimension();
        std::vector<double> state(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            // coordinate j holds the value j steps back from the latest
            int idx = p - 1 - (j % p);
            state[static_cast<std::size_t>(j)] = pat.values[static_cast<std::size_t>(idx)];
        }
        double dev = 0.0;
        for (int t = 0; t < p; ++t) {
            std::vector<double> next = map.apply(state);
            double expected = pat.values[static_cast<std::size_t>(t % p)];
            dev = std::max(dev, std::fabs(next[0] - expected));
            state = std::move(next);
        }
        pat.replay_deviation = dev;
        return pat;
    }
    return std::nullopt;
}

CompanionMatrix companion_jacobian(const VectorMap& map, std::span<const double> X,
                                   const FdOptions& fd) {
    int m = map.dimension();
    if (static_cast<int>(X.size()) != m) {
        throw std::invalid_argument("state size does not match map dimension");
    }
    CompanionMatrix out;
    out.m = Eigen::MatrixXd::Zero(m, m);
    std::vector<double> probe(X.begin(), X.end());
    for (int j = 0; j < m; ++j) {
        double step = std::max(fd.h_abs, fd.h_rel * std::fabs(X[static_cast<std::size_t>(j)]));
        double saved = probe[static_cast<std::size_t>(j)];
        probe[static_cast<std::size_t>(j)] = saved + step;
        double up = map.head(probe);
        probe[static_cast<std::size_t>(j)] = saved - step;
        double down = map.head(probe);
        probe[static_cast<std::size_t>(j)] = saved;
        out.m(0, j) = (up - down) / (2.0 * step);
    }
    for (int i = 1; i < m; ++i) {
        out.m(i, i - 1) = 1.0;
    }
    return out;
}

double matrix_norm_inf(const Eigen::MatrixXd& m) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        best = std::max(best, m.row(i).cwiseAbs().sum());
    }
    return best;
}

EstimatePattern EstimatePattern::nominal_to_perturbed() {
    return {components_of(Variant::Nominal), ComponentSet{}.with(Component::FIncr)};
}

EstimatePattern EstimatePattern::nominal_to_controlled() {
    return {components_of(Variant::Nominal), ComponentSet{}.with(Component::G)};
}

EstimatePattern EstimatePattern::nominal_to_controlled_perturbed() {
    return {components_of(Variant::Nominal),
            ComponentSet{}.with(Component::FIncr).with(Component::G)};
}

EstimatePattern EstimatePattern::incremental_completion() {
    return {ComponentSet{true, true, true, false}, ComponentSet{}.with(Component::GIncr)};
}

const char* estimate_class_name(EstimateClass c) {
    switch (c) {
        case EstimateClass::Unique: return "unique";
        case EstimateClass::InfinitelyMany: return "infinitelyMany";
        case EstimateClass::None: return "none";
    }
    return "?";
}

namespace {

bool same_sets(const EstimatePattern& a, const EstimatePattern& b) {
    return a.base == b.base && a.perturbing == b.perturbing;
}

}  // namespace

void validate_pattern(const SystemBundle& b, const EstimatePattern& p) {
    const bool known = same_sets(p, EstimatePattern::nominal_to_perturbed()) ||
                       same_sets(p, EstimatePattern::nominal_to_controlled()) ||
                       same_sets(p, EstimatePattern::nominal_to_controlled_perturbed()) ||
                       same_sets(p, EstimatePattern::incremental_completion());
    if (!known) {
        throw HypothesisError("estimate pattern (" + set_label(p.base) + " -> " +
                              set_label(p.perturbing) + ") is not one of the four supported "
                              "base/perturbing shapes");
    }
    int base_order = b.order(p.base);
    int pert_order = b.order(p.perturbing);
    if (pert_order > base_order) {
        throw HypothesisError("order hypothesis fails: perturbing set " +
                              set_label(p.perturbing) + " has order " +
                              std::to_string(pert_order) + " above the base set " +
                              set_label(p.base) + " order " + std::to_string(base_order));
    }
}

LinearEstimate linear_estimate(const SystemBundle& b, const EstimatePattern& pattern,
                               double x_base, double rank_tol, const FdOptions& fd) {
    validate_pattern(b, pattern);
    int m = std::max(1, b.order(pattern.base));

    ComponentSet combined = pattern.base;
    for (Component c : {Component::F, Component::FIncr, Component::G, Component::GIncr}) {
        if (pattern.perturbing.contains(c)) combined = combined.with(c);
    }

    LinearEstimate est;
    est.pattern = pattern;
    est.base = Eigen::VectorXd::Constant(m, x_base);

    VectorMap whole = associate_map(b, combined, m);
    std::vector<double> xbar(static_cast<std::size_t>(m), x_base);
    est.companion = companion_jacobian(whole, xbar, fd).m;
    est.m_norm_inf = matrix_norm_inf(est.companion);

    est.residual_vector = Eigen::VectorXd::Zero(m);
    est.residual_vector(0) = b.scalar_sum(pattern.perturbing, xbar);

    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m) - est.companion;
    // the floor keeps the threshold above finite-difference noise when
    // I-M is numerically tiny but not exactly zero
    est.rank_tol_used = rank_tol > 0.0
                            ? rank_tol
                            : 1e-9 * std::max({1.0, matrix_norm_inf(A), est.m_norm_inf});

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sing = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sing.size(); ++i) {
        if (sing(i) > est.rank_tol_used) ++rank;
    }
    est.rank = rank;

    Eigen::MatrixXd aug(m, m + 1);
    aug.leftCols(m) = A;
    aug.col(m) = est.residual_vector;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_aug(aug);
    const auto& sing_aug = svd_aug.singularValues();
    int rank_aug = 0;
    for (Eigen::Index i = 0; i < sing_aug.size(); ++i) {
        if (sing_aug(i) > est.rank_tol_used) ++rank_aug;
    }
    est.rank_augmented = rank_aug;

    if (rank == m) {
        est.classification = EstimateClass::Unique;
    } else if (rank_aug == rank) {
        est.classification = EstimateClass::InfinitelyMany;
    } else {
        est.classification = EstimateClass::None;
    }

    if (est.classification != EstimateClass::None) {
        // Least-squares solve through the SVD doubles as the exact
        // solution in the full-rank case and the least-norm member of
        // the affine solution set in the rank-deficient consistent case.
        Eigen::VectorXd delta = Eigen::VectorXd::Zero(m);
        const Eigen::MatrixXd& U = svd.matrixU();
        const Eigen::MatrixXd& V = svd.matrixV();
        for (Eigen::Index i = 0; i < sing.size(); ++i) {
            if (sing(i) > est.rank_tol_used) {
                delta += (U.col(i).dot(est.residual_vector) / sing(i)) * V.col(i);
            }
        }
        est.estimate = est.base + delta;
    }

    if (est.m_norm_inf < 1.0) {
        est.contraction_bound =
            est.residual_vector.cwiseAbs().maxCoeff() / (1.0 - est.m_norm_inf);
    }
    return est;
}

std::vector<ErrorCurveRow> estimate_error_curve(
    const std::function<SystemBundle(double)>& family, const EstimatePattern& pattern,
    std::span<const double> eps_values, const SolveOptions& opts) {
    std::vector<ErrorCurveRow> rows;
    double midpoint = 0.5 * (opts.lo + opts.hi);
    std::optional<double> prev_base;
    for (double eps : eps_values) {
        ErrorCurveRow row;
        row.eps = eps;
        SystemBundle b = family(eps);

        auto base_roots = find_equilibria(b, pattern.base, opts);
        if (base_roots.empty()) {
            row.flagged = true;
            rows.push_back(row);
            continue;
        }
        double target = prev_base.value_or(midpoint);
        const EquilibriumPoint* base_pick = &base_roots.front();
        for (const auto& r : base_roots) {
            if (std::fabs(r.x - target) < std::fabs(base_pick->x - target)) base_pick = &r;
        }
        row.x_base = base_pick->x;
        prev_base = base_pick->x;

        LinearEstimate est = linear_estimate(b, pattern, base_pick->x);
        row.classification = est.classification;
        if (!est.estimate) {
            row.flagged = true;
            rows.push_back(row);
            continue;
        }
        row.estimate = est.estimate;

        ComponentSet shifted = pattern.base;
        for (Component c : {Component::F, Component::FIncr, Component::G, Component::GIncr}) {
            if (pattern.perturbing.contains(c)) shifted = shifted.with(c);
        }
        auto true_roots = find_equilibria(b, shifted, opts);
        if (true_roots.empty()) {
            row.flagged = true;
            rows.push_back(row);
            continue;
        }
        double anchor = (*est.estimate)(0);
        const EquilibriumPoint* true_pick = &true_roots.front();
        for (const auto& r : true_roots) {
            if (std::fabs(r.x - anchor) < std::fabs(true_pick->x - anchor)) true_pick = &r;
        }
        row.x_true = true_pick->x;

        int m = est.estimate->size();
        Eigen::VectorXd truth = Eigen::VectorXd::Constant(m, true_pick->x);
        row.error = (*est.estimate - truth).cwiseAbs().maxCoeff();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace stabkit
