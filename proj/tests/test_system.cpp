#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "stabkit/system.hpp"

using namespace stabkit;

namespace {

ComponentMap comp(const char* text, int order, Component label) {
    return ComponentMap{LaggedExpr::parse(text, order), label};
}

}  // namespace

TEST_CASE("bundle orders and absent components") {
    SystemBundle b(comp("0.5*x[1]", 1, Component::F));
    CHECK(b.order() == 1);
    CHECK(b.order(Component::FIncr) == 0);
    double w[] = {4.0};
    CHECK(b.component_value(Component::FIncr, w) == 0.0);
    CHECK(b.scalar_sum(Variant::Perturbed, w) == 2.0);

    b.set(comp("0.1", 1, Component::FIncr));
    CHECK(b.scalar_sum(Variant::Perturbed, w) == 2.1);
}

TEST_CASE("variant component selections") {
    CHECK(components_of(Variant::Nominal) == ComponentSet{true, false, false, false});
    CHECK(components_of(Variant::Perturbed) == ComponentSet{true, true, false, false});
    CHECK(components_of(Variant::Controlled) == ComponentSet{true, false, true, false});
    CHECK(components_of(Variant::ControlledPerturbed) == ComponentSet{true, true, true, true});
    CHECK(set_label(components_of(Variant::ControlledPerturbed)) == "f+f_incr+g+g_incr");
}

TEST_CASE("leading lift: shift and scale") {
    auto c = comp("2*x[1]", 1, Component::F);
    auto v = lift_leading(c, 2);
    double x[] = {3.0, 5.0};
    auto y = v.apply(x);
    CHECK(y == std::vector<double>{6.0, 3.0});
}

TEST_CASE("leading lift: order two head") {
    auto c = comp("x[1]+x[2]", 2, Component::F);
    auto v = lift_leading(c, 2);
    double x[] = {1.0, 1.0};
    auto y = v.apply(x);
    CHECK(y == std::vector<double>{2.0, 1.0});
}

TEST_CASE("leading lift: dimension one is the scalar map") {
    auto c = comp("2*x[1]", 1, Component::F);
    auto v = lift_leading(c, 1);
    double x[] = {3.0};
    CHECK(v.apply(x) == std::vector<double>{6.0});
}

TEST_CASE("additive lift: value plus zeros") {
    auto c = comp("x[1]^2", 1, Component::FIncr);
    auto v = lift_additive(c, 2);
    double x[] = {3.0, 7.0};
    CHECK(v.apply(x) == std::vector<double>{9.0, 0.0});
}

TEST_CASE("additive lift of zero component is the zero vector") {
    auto c = comp("0", 1, Component::GIncr);
    auto v = lift_additive(c, 3);
    double x[] = {1.0, 2.0, 3.0};
    CHECK(v.apply(x) == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("lift below component order is rejected") {
    auto c = comp("x[1]+x[3]", 3, Component::F);
    CHECK_THROWS_AS(lift_leading(c, 2), std::invalid_argument);
    CHECK_THROWS_AS(lift_additive(c, 2), std::invalid_argument);
}

TEST_CASE("sum of lifts keeps the shift structure") {
    auto f = comp("0.3*x[1]+0.2*x[2]", 2, Component::F);
    auto ft = comp("x[1]^2", 1, Component::FIncr);
    auto v = lift_leading(f, 2) + lift_additive(ft, 2);
    double x[] = {0.5, -1.5};
    auto y = v.apply(x);
    CHECK(y[0] == (0.3 * 0.5 + 0.2 * -1.5) + 0.25);
    CHECK(y[1] == 0.5);
}

TEST_CASE("two shift tails cannot be added") {
    auto f = comp("x[1]", 1, Component::F);
    auto a = lift_leading(f, 2);
    CHECK_THROWS_AS(a + a, std::invalid_argument);
    auto b = lift_additive(f, 2);
    CHECK_NOTHROW(a + b);
    CHECK_NOTHROW(b + b);
}

TEST_CASE("associate map examples") {
    SystemBundle b1(comp("0.5*x[1]", 1, Component::F));
    auto v1 = associate_map(b1, Variant::Nominal);
    double x1[] = {4.0};
    CHECK(v1.apply(x1) == std::vector<double>{2.0});

    SystemBundle b2(comp("0.5*x[1]", 1, Component::F));
    b2.set(comp("0.1", 1, Component::FIncr));
    auto v2 = associate_map(b2, Variant::Perturbed);
    CHECK(v2.apply(x1) == std::vector<double>{2.1});

    SystemBundle b3(comp("0.5*x[1]+0.2*x[2]", 2, Component::F));
    auto v3 = associate_map(b3, Variant::Nominal);
    double x3[] = {1.0, 1.0};
    CHECK(v3.apply(x3) == std::vector<double>{0.7, 1.0});
}

TEST_CASE("iterate: geometric decay") {
    SystemBundle b(comp("0.5*x[1]", 1, Component::F));
    auto map = associate_map(b, Variant::Nominal);
    double x0[] = {8.0};
    auto t = iterate(map, x0, 3);
    CHECK(t.scalars() == std::vector<double>{8.0, 4.0, 2.0, 1.0});
    CHECK_FALSE(t.truncated);
}

TEST_CASE("iterate: zero steps is the identity") {
    SystemBundle b(comp("sin(x[1])", 1, Component::F));
    auto map = associate_map(b, Variant::Nominal);
    double x0[] = {0.25};
    auto t = iterate(map, x0, 0);
    REQUIRE(t.states.size() == 1);
    CHECK(t.states[0] == std::vector<double>{0.25});
}

TEST_CASE("iterate: doubling map grows past 1e15 or truncates") {
    SystemBundle b(comp("2*x[1]", 1, Component::F));
    auto map = associate_map(b, Variant::Nominal);
    double x0[] = {1.0};
    auto t = iterate(map, x0, 60);
    if (t.truncated) {
        CHECK(t.truncation_reason.find("diverged-nonfinite") != std::string::npos);
    } else {
        CHECK(t.states.back()[0] > 1e15);
    }
}

TEST_CASE("iterate truncates on genuine overflow") {
    SystemBundle b(comp("x[1]^2", 1, Component::F));
    auto map = associate_map(b, Variant::Nominal);
    double x0[] = {10.0};
    auto t = iterate(map, x0, 20);  // squaring from 10 overflows fast
    CHECK(t.truncated);
    CHECK(t.truncation_reason.find("diverged-nonfinite") != std::string::npos);
}

TEST_CASE("scalar run: geometric decay") {
    SystemBundle b(comp("0.5*x[1]", 1, Component::F));
    double h[] = {8.0};
    auto r = scalar_run(b, Variant::Nominal, h, 3);
    CHECK(r.values == std::vector<double>{4.0, 2.0, 1.0});
}

TEST_CASE("scalar run: pure delay gives period two") {
    SystemBundle b(comp("x[2]", 2, Component::F));
    double h[] = {-1.0, 1.0};  // x0 = -1, x(-1) = 1
    auto r = scalar_run(b, Variant::Nominal, h, 4);
    CHECK(r.values == std::vector<double>{1.0, -1.0, 1.0, -1.0});
}

TEST_CASE("order compatibility") {
    {
        SystemBundle b(comp("x[1]+x[2]", 2, Component::F));
        b.set(comp("x[3]", 3, Component::FIncr));
        auto r = order_compatibility(b);
        CHECK_FALSE(r.nominal_vs_perturbed);
        CHECK_FALSE(r.nominal_vs_full);
    }
    {
        SystemBundle b(comp("x[1]+x[2]", 2, Component::F));
        b.set(comp("x[1]", 1, Component::FIncr));
        b.set(comp("x[2]", 2, Component::G));
        b.set(comp("x[2]^2", 2, Component::GIncr));
        auto r = order_compatibility(b);
        CHECK(r.nominal_vs_perturbed);
        CHECK(r.nominal_vs_full);
    }
    {
        SystemBundle b(comp("x[1]+x[2]", 2, Component::F));
        b.set(comp("x[2]", 2, Component::FIncr));
        b.set(comp("x[3]", 3, Component::G));
        auto r = order_compatibility(b);
        CHECK(r.nominal_vs_perturbed);
        CHECK_FALSE(r.nominal_vs_full);
    }
}

namespace {

SystemBundle random_bundle(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coeff(-0.9, 0.9);
    auto lin = [&](int order, Component label) {
        std::string text;
        for (int j = 1; j <= order; ++j) {
            if (!text.empty()) text += " + ";
            text += format_double(coeff(rng)) + "*x[" + std::to_string(j) + "]";
        }
        // sprinkle a mild nonlinearity
        if (rng() % 2 == 0) text += " + " + format_double(coeff(rng) * 0.1) + "*x[1]^2";
        return comp(text.c_str(), order, label);
    };
    int m0 = 1 + static_cast<int>(rng() % 3);
    SystemBundle b(lin(m0, Component::F));
    if (rng() % 2) b.set(lin(1 + static_cast<int>(rng() % 3), Component::FIncr));
    if (rng() % 2) b.set(lin(1 + static_cast<int>(rng() % 3), Component::G));
    if (rng() % 2) b.set(lin(1 + static_cast<int>(rng() % 3), Component::GIncr));
    return b;
}

}  // namespace

TEST_CASE("property: shift structure holds exactly for random maps") {
    std::mt19937_64 rng(991);
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        SystemBundle b = random_bundle(rng);
        for (Variant v : {Variant::Nominal, Variant::Perturbed, Variant::Controlled,
                          Variant::ControlledPerturbed}) {
            auto map = associate_map(b, v);
            std::vector<double> x(static_cast<std::size_t>(map.dimension()));
            for (auto& c : x) c = val(rng);
            auto y = map.apply(x);
            for (int i = 1; i < map.dimension(); ++i) {
                CHECK(y[static_cast<std::size_t>(i)] == x[static_cast<std::size_t>(i - 1)]);
            }
        }
    }
}

TEST_CASE("property: scalar and vector paths agree to the last bit") {
    std::mt19937_64 rng(1717);
    std::uniform_real_distribution<double> val(-0.5, 0.5);
    for (int trial = 0; trial < 30; ++trial) {
        SystemBundle b = random_bundle(rng);
        for (Variant v : {Variant::Nominal, Variant::Perturbed, Variant::Controlled,
                          Variant::ControlledPerturbed}) {
            int m = b.order(v);
            std::vector<double> h(static_cast<std::size_t>(m));
            for (auto& c : h) c = val(rng);
            const int N = 1000;
            auto sr = scalar_run(b, v, h, N);
            auto map = associate_map(b, v);
            auto tr = iterate(map, h, N);
            CHECK(sr.truncated == tr.truncated);
            REQUIRE(sr.values.size() + 1 == tr.states.size());
            for (std::size_t n = 0; n < sr.values.size(); ++n) {
                CHECK(sr.values[n] == tr.states[n + 1][0]);
            }
        }
    }
}

TEST_CASE("property: associate map equals the sum of individual lifts") {
    std::mt19937_64 rng(42042);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        SystemBundle b = random_bundle(rng);
        int m = b.order();
        auto whole = associate_map(b, Variant::ControlledPerturbed);
        std::optional<VectorMap> sum = lift_leading(*b.component(Component::F), m);
        for (Component c : {Component::FIncr, Component::G, Component::GIncr}) {
            if (b.has(c)) sum = *sum + lift_additive(*b.component(c), m);
        }
        for (int k = 0; k < 10; ++k) {
            std::vector<double> x(static_cast<std::size_t>(m));
            for (auto& c : x) c = val(rng);
            CHECK(whole.apply(x) == sum->apply(x));
        }
    }
}
