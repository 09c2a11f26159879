#include "doctest.h"

#include <cmath>
#include <random>

#include "stabkit/equilibria.hpp"
#include "stabkit/stability.hpp"

using namespace stabkit;

namespace {

int scan_order(const std::string& text) {
    int m = 1;
    for (std::size_t i = 0; i + 2 < text.size(); ++i) {
        if (text[i] == 'x' && text[i + 1] == '[') m = std::max(m, text[i + 2] - '0');
    }
    return m;
}

SystemBundle bundle_of(const std::vector<std::pair<Component, std::string>>& parts) {
    SystemBundle b(ComponentMap{
        LaggedExpr::parse(parts.front().second, scan_order(parts.front().second)),
        parts.front().first});
    for (std::size_t i = 1; i < parts.size(); ++i) {
        b.set(ComponentMap{LaggedExpr::parse(parts[i].second, scan_order(parts[i].second)),
                           parts[i].first});
    }
    return b;
}

RegionSpec unit_ball(int m, std::uint64_t seed = 7, int count = 200) {
    RegionSpec s;
    s.center.assign(static_cast<std::size_t>(m), 0.0);
    s.radius = 1.0;
    s.sample_count = count;
    s.rng_seed = seed;
    return s;
}

double norm_inf(std::span<const double> a, std::span<const double> b) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::fabs(a[i] - b[i]));
    return best;
}

}  // namespace

TEST_CASE("sample_region emits face probes and respects bounds") {
    RegionSpec s = unit_ball(1);
    auto pts = sample_region(s);
    REQUIRE(pts.size() >= 2);
    CHECK(pts[0][0] == -1.0);
    CHECK(pts[1][0] == 1.0);
    for (const auto& p : pts) {
        CHECK(std::fabs(p[0]) <= 1.0);
    }
    CHECK(static_cast<int>(pts.size()) == 2 + s.sample_count);
}

TEST_CASE("sample_region excludes the ball around the reference") {
    RegionSpec s = unit_ball(2);
    s.r_excl = 0.1;
    auto pts = sample_region(s);
    std::vector<double> center{0.0, 0.0};
    for (const auto& p : pts) {
        CHECK(norm_inf(p, center) >= 0.1);
    }
}

TEST_CASE("sample_region is deterministic and prefix-stable") {
    RegionSpec s = unit_ball(3, 99, 64);
    auto a = sample_region(s);
    auto b = sample_region(s);
    CHECK(a == b);
    s.sample_count = 128;
    auto c = sample_region(s);
    REQUIRE(c.size() > a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == c[i]);
    }
}

TEST_CASE("sample_region covers boxes with face midpoints") {
    RegionSpec s;
    s.shape = RegionShape::Box;
    s.center = {1.0, 2.0};
    s.lo = {0.0, 1.0};
    s.hi = {2.0, 3.0};
    s.sample_count = 50;
    auto pts = sample_region(s);
    REQUIRE(pts.size() >= 4);
    CHECK(pts[0] == std::vector<double>{0.0, 2.0});
    CHECK(pts[1] == std::vector<double>{2.0, 2.0});
    CHECK(pts[2] == std::vector<double>{1.0, 1.0});
    CHECK(pts[3] == std::vector<double>{1.0, 3.0});
    for (const auto& p : pts) {
        CHECK(p[0] >= 0.0);
        CHECK(p[0] <= 2.0);
        CHECK(p[1] >= 1.0);
        CHECK(p[1] <= 3.0);
    }
}

TEST_CASE("validate_region rejects malformed specs") {
    RegionSpec s = unit_ball(1);
    s.radius = 0.0;
    CHECK_THROWS_AS(sample_region(s), std::invalid_argument);
    s = unit_ball(1);
    s.sample_count = 0;
    CHECK_THROWS_AS(sample_region(s), std::invalid_argument);
    s = unit_ball(1);
    s.r_excl = 1.0;  // must stay below the extent
    CHECK_THROWS_AS(sample_region(s), std::invalid_argument);
    s = unit_ball(2);
    s.reference = {0.0};
    CHECK_THROWS_AS(sample_region(s), std::invalid_argument);
}

TEST_CASE("growth_certificate measures a pure doubling map") {
    auto b = bundle_of({{Component::F, "2*x[1]"}});
    auto cert = growth_certificate(b, Variant::Nominal, 0.0, unit_ball(1));
    CHECK(cert.alpha == 2.0);
    CHECK(cert.beta == 2.0);
    CHECK(cert.skipped == 0);
    CHECK(cert.sample_total > 0);
}

TEST_CASE("growth_certificate measures a pure halving map") {
    auto b = bundle_of({{Component::F, "0.5*x[1]"}});
    auto cert = growth_certificate(b, Variant::Nominal, 0.0, unit_ball(1));
    CHECK(cert.alpha == 0.5);
    CHECK(cert.beta == 0.5);
}

TEST_CASE("growth_certificate brackets a mildly nonlinear map") {
    auto b = bundle_of({{Component::F, "2*x[1] + 0.1*x[1]^2"}});
    RegionSpec s = unit_ball(1);
    s.radius = 0.5;
    auto cert = growth_certificate(b, Variant::Nominal, 0.0, s);
    CHECK(cert.alpha >= 1.9);
    CHECK(cert.beta <= 2.1);
    CHECK(cert.alpha <= cert.beta);
}

TEST_CASE("growth_certificate witnesses replay bit-exactly") {
    auto b = bundle_of({{Component::F, "sin(x[1]) + 0.25*x[2]"}});
    auto cert = growth_certificate(b, Variant::Nominal, 0.0, unit_ball(2, 31));
    for (const RatioWitness* w : {&cert.argmin, &cert.argmax}) {
        double val = b.scalar_sum(components_of(Variant::Nominal), w->state);
        CHECK(val == w->image);
        double denom = norm_inf(w->state, cert.equilibrium);
        CHECK(std::fabs(val - 0.0) / denom == w->ratio);
    }
    CHECK(cert.argmin.ratio == cert.alpha);
    CHECK(cert.argmax.ratio == cert.beta);
}

TEST_CASE("growth_certificate skips samples that fail to evaluate") {
    auto b = bundle_of({{Component::F, "sqrt(x[1] - 0.5)"}});
    auto cert = growth_certificate(b, Variant::Nominal, 0.0, unit_ball(1, 5, 100));
    CHECK(cert.skipped > 0);      // the region dips below 0.5
    CHECK(cert.sample_total > 0); // but not everywhere
}

TEST_CASE("growth_certificate reports inflation when admissible") {
    auto b = bundle_of({{Component::F, "0.5*x[1]"}});
    auto cert =
        growth_certificate(b, Variant::Nominal, 0.0, unit_ball(1), InflationFactors{0.2, 0.5});
    REQUIRE(cert.alpha_inflated.has_value());
    REQUIRE(cert.beta_inflated.has_value());
    CHECK(*cert.alpha_inflated == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(*cert.beta_inflated == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(cert.inflation_valid);  // 0.5 < 1/0.5 - 1 = 1

    auto bad_alpha =
        growth_certificate(b, Variant::Nominal, 0.0, unit_ball(1), InflationFactors{1.2, 0.0});
    CHECK_FALSE(bad_alpha.inflation_valid);
    CHECK(bad_alpha.inflation_note == "alpha_tilde exceeds 1");

    auto wide = bundle_of({{Component::F, "2*x[1]"}});
    auto bad_beta =
        growth_certificate(wide, Variant::Nominal, 0.0, unit_ball(1), InflationFactors{0.0, 0.1});
    CHECK_FALSE(bad_beta.inflation_valid);  // needs beta_tilde < 1/2 - 1 < 0
}

TEST_CASE("check_invariance passes a contraction and fails an expansion") {
    auto contract = bundle_of({{Component::F, "0.5*x[1]"}});
    VectorMap cmap = associate_map(contract, Variant::Nominal);
    auto ok = check_invariance(cmap, unit_ball(1));
    CHECK(ok.pass);
    CHECK(ok.checked > 0);
    CHECK_FALSE(ok.witness.has_value());

    auto expand = bundle_of({{Component::F, "2*x[1]"}});
    VectorMap emap = associate_map(expand, Variant::Nominal);
    auto bad = check_invariance(emap, unit_ball(1));
    CHECK_FALSE(bad.pass);
    REQUIRE(bad.witness.has_value());
    CHECK(bad.witness->state == std::vector<double>{-1.0});  // first face probe escapes
    CHECK(bad.witness->image == std::vector<double>{-2.0});
}

TEST_CASE("check_invariance accepts the identity map anywhere") {
    auto b = bundle_of({{Component::F, "x[1]"}});
    VectorMap map = associate_map(b, Variant::Nominal);
    RegionSpec s = unit_ball(1);
    s.center = {0.1};
    s.radius = 0.3;
    CHECK(check_invariance(map, s).pass);

    RegionSpec box;
    box.shape = RegionShape::Box;
    box.center = {0.7};
    box.lo = {0.4};
    box.hi = {1.0};
    box.sample_count = 40;
    CHECK(check_invariance(map, box).pass);
}

TEST_CASE("contraction_trace follows a geometric decay") {
    auto b = bundle_of({{Component::F, "0.5*x[1]"}});
    VectorMap map = associate_map(b, Variant::Nominal);
    std::vector<double> x_bar{0.0}, x0{1.0};
    auto tr = contraction_trace(map, x_bar, x0, 10);
    REQUIRE(tr.ratios.size() == 10);
    for (int n = 1; n <= 10; ++n) {
        CHECK(tr.ratios[static_cast<std::size_t>(n - 1)] == std::pow(2.0, -n));
    }
    CHECK(tr.fitted_rate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_FALSE(tr.expanding);
    CHECK_FALSE(tr.truncated);
}

TEST_CASE("contraction_trace flags expansion") {
    auto b = bundle_of({{Component::F, "2*x[1]"}});
    VectorMap map = associate_map(b, Variant::Nominal);
    std::vector<double> x_bar{0.0}, x0{1.0};
    auto tr = contraction_trace(map, x_bar, x0, 8);
    REQUIRE(tr.ratios.size() == 8);
    CHECK(tr.ratios.back() == 256.0);
    CHECK(tr.expanding);
    CHECK(tr.fitted_rate == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS(contraction_trace(map, x_bar, x_bar, 4), std::invalid_argument);
}

TEST_CASE("contraction_trace truncates on numeric blowup") {
    auto b = bundle_of({{Component::F, "x[1]^2"}});
    VectorMap map = associate_map(b, Variant::Nominal);
    std::vector<double> x_bar{0.0}, x0{10.0};
    auto tr = contraction_trace(map, x_bar, x0, 2000);
    CHECK(tr.truncated);
    CHECK(tr.expanding);
    CHECK(tr.truncation_reason.find("diverged-nonfinite") != std::string::npos);
}

TEST_CASE("classify separates an unstable open loop from a stable closed loop") {
    auto b = bundle_of({{Component::F, "2*x[1]"}, {Component::G, "-1.5*x[1]"}});
    auto res = classify(b, ClassifyCase::NominalVsControlled, 0.0, 0.0, unit_ball(1));
    CHECK(res.uncontrolled.verdict == Verdict::Unstable);
    CHECK(res.uncontrolled.certificate.alpha == 2.0);
    CHECK(res.controlled.verdict == Verdict::AsymptoticallyStable);
    CHECK(res.controlled.certificate.beta == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(res.controlled.invariance.pass);
    CHECK_FALSE(res.uncontrolled.traces.empty());
}

TEST_CASE("classify is inconclusive at the unit growth boundary") {
    auto b = bundle_of({{Component::F, "x[1]"}, {Component::G, "0"}});
    auto res = classify(b, ClassifyCase::NominalVsControlled, 0.0, 0.0, unit_ball(1));
    CHECK(res.uncontrolled.verdict == Verdict::Inconclusive);
    CHECK(res.controlled.verdict == Verdict::Inconclusive);
    CHECK(res.uncontrolled.certificate.alpha == 1.0);
    CHECK(res.controlled.certificate.beta == 1.0);
}

TEST_CASE("classify rejects mismatched orders and dimensions") {
    auto b = bundle_of({{Component::F, "0.5*x[1]"}, {Component::G, "0.1*x[2]"}});
    CHECK_THROWS_AS(classify(b, ClassifyCase::NominalVsControlled, 0.0, 0.0, unit_ball(1)),
                    std::invalid_argument);
    auto ok = bundle_of({{Component::F, "0.5*x[1]"}, {Component::G, "0.1*x[1]"}});
    CHECK_THROWS_AS(classify(ok, ClassifyCase::NominalVsControlled, 0.0, 0.0, unit_ball(2)),
                    std::invalid_argument);
}

TEST_CASE("classify case sets follow the three comparisons") {
    auto [u1, c1] = classify_case_sets(ClassifyCase::NominalVsControlled);
    CHECK(u1 == components_of(Variant::Nominal));
    CHECK(c1 == components_of(Variant::Controlled));
    auto [u2, c2] = classify_case_sets(ClassifyCase::PerturbedVsControlledPerturbed);
    CHECK(u2 == components_of(Variant::Perturbed));
    CHECK(c2 == components_of(Variant::Perturbed).with(Component::G));
    auto [u3, c3] = classify_case_sets(ClassifyCase::PerturbedVsFull);
    CHECK(u3 == components_of(Variant::Perturbed));
    CHECK(c3 == components_of(Variant::ControlledPerturbed));
}

TEST_CASE("verdicts are a pure function of the evidence") {
    auto b = bundle_of({{Component::F, "2*x[1]"}, {Component::G, "-1.5*x[1]"}});
    auto res = classify(b, ClassifyCase::NominalVsControlled, 0.0, 0.0, unit_ball(1));
    for (const SideVerdict* side : {&res.uncontrolled, &res.controlled}) {
        CHECK(side->verdict == side_verdict(side->certificate, side->invariance));
    }
}

TEST_CASE("larger samples only widen the certified bracket") {
    auto b = bundle_of({{Component::F, "sin(x[1]) + 0.2*x[1]^2"}});
    RegionSpec small = unit_ball(1, 1234, 50);
    RegionSpec large = unit_ball(1, 1234, 400);
    auto cs = growth_certificate(b, Variant::Nominal, 0.0, small);
    auto cl = growth_certificate(b, Variant::Nominal, 0.0, large);
    CHECK(cl.alpha <= cs.alpha);
    CHECK(cl.beta >= cs.beta);
}

TEST_CASE("contractive first-order runs obey the certified decay chain") {
    std::mt19937_64 rng(515);
    std::uniform_real_distribution<double> slope(-0.7, 0.7);
    std::uniform_real_distribution<double> curve(-0.2, 0.2);
    for (int trial = 0; trial < 25; ++trial) {
        double c = slope(rng), d = curve(rng);
        auto body = LaggedExpr::binary(
            BinaryOp::Add,
            LaggedExpr::binary(BinaryOp::Multiply, LaggedExpr::constant(c),
                               LaggedExpr::lag(1, 1)),
            LaggedExpr::binary(BinaryOp::Multiply, LaggedExpr::constant(d),
                               LaggedExpr::binary(BinaryOp::Power, LaggedExpr::lag(1, 1),
                                                  LaggedExpr::constant(2.0))));
        SystemBundle b(ComponentMap{body, Component::F});
        RegionSpec s = unit_ball(1, 600 + static_cast<std::uint64_t>(trial), 100);
        s.radius = 0.5;
        auto cert = growth_certificate(b, Variant::Nominal, 0.0, s);
        VectorMap map = associate_map(b, Variant::Nominal);
        auto inv = check_invariance(map, s);
        REQUIRE(cert.beta < 1.0);
        REQUIRE(inv.pass);
        for (const auto& x0 : sample_region(s)) {
            Trajectory traj = iterate(map, x0, 30);
            auto vals = traj.scalars();  // vals[0] is the start itself
            double bound = std::fabs(x0[0]);
            for (std::size_t i = 1; i < vals.size(); ++i) {
                bound *= cert.beta;
                CHECK(std::fabs(vals[i]) <= bound * (1.0 + 1e-9));
            }
        }
    }
}

TEST_CASE("expansive first-order runs escape at the certified rate") {
    std::mt19937_64 rng(516);
    std::uniform_real_distribution<double> slope(1.1, 2.0);
    for (int trial = 0; trial < 25; ++trial) {
        double c = slope(rng);
        auto body = LaggedExpr::binary(BinaryOp::Multiply, LaggedExpr::constant(c),
                                       LaggedExpr::lag(1, 1));
        SystemBundle b(ComponentMap{body, Component::F});
        RegionSpec s = unit_ball(1, 700 + static_cast<std::uint64_t>(trial), 60);
        auto cert = growth_certificate(b, Variant::Nominal, 0.0, s);
        REQUIRE(cert.alpha > 1.0);
        VectorMap map = associate_map(b, Variant::Nominal);
        for (const auto& x0 : sample_region(s)) {
            double dist = std::fabs(x0[0]);
            std::vector<double> state = x0;
            double bound = dist;
            for (int n = 0; n < 20; ++n) {
                state = map.apply(state);
                bound *= cert.alpha;
                if (!region_contains(s, state)) break;
                CHECK(std::fabs(state[0]) >= bound / (1.0 + 1e-9));
            }
        }
    }
}
