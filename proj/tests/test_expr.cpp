#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "stabkit/expr.hpp"

using namespace stabkit;

TEST_CASE("basic parse and evaluate") {
    auto e = LaggedExpr::parse("2*x[1]", 1);
    double h[] = {3.0};
    CHECK(e.evaluate(h) == 6.0);
    CHECK(e.order() == 1);
    CHECK(e.max_lag() == 1);
}

TEST_CASE("logistic form") {
    auto e = LaggedExpr::parse("2*x[1]*(1 - x[1])", 1);
    double h[] = {0.5};
    CHECK(e.evaluate(h) == 0.5);
}

TEST_CASE("lag out of range is a parse error") {
    CHECK_THROWS_AS(LaggedExpr::parse("x[3]", 2), ParseError);
    try {
        LaggedExpr::parse("x[3]", 2);
    } catch (const ParseError& err) {
        CHECK(std::string(err.what()).find("x[3]") != std::string::npos);
        CHECK(err.offset() == 2);
    }
    CHECK_THROWS_AS(LaggedExpr::parse("x[0]", 2), ParseError);
    // In-range lags of a higher declared order parse fine.
    CHECK_NOTHROW(LaggedExpr::parse("x[3]", 3));
}

TEST_CASE("lag bound is enforced at parse time only") {
    // Evaluation trusts the parse-time bound; a short history is an
    // argument error, not a lag check.
    auto e = LaggedExpr::parse("x[2]", 2);
    std::vector<double> h = {1.0, 5.0};
    CHECK(e.evaluate(h) == 5.0);
}

TEST_CASE("division by zero is a domain error") {
    auto e = LaggedExpr::parse("x[1]/x[2]", 2);
    double h[] = {1.0, 0.0};
    CHECK_THROWS_AS(e.evaluate(h), EvalError);
    double ok[] = {1.0, 4.0};
    CHECK(e.evaluate(ok) == 0.25);
}

TEST_CASE("sqrt of negative is a domain error") {
    auto e = LaggedExpr::parse("sqrt(x[1])", 1);
    double neg[] = {-1.0};
    CHECK_THROWS_AS(e.evaluate(neg), EvalError);
    double pos[] = {9.0};
    CHECK(e.evaluate(pos) == 3.0);
}

TEST_CASE("negative base with non-integer exponent is a domain error") {
    auto e = LaggedExpr::parse("x[1]^0.5", 1);
    double neg[] = {-4.0};
    CHECK_THROWS_AS(e.evaluate(neg), EvalError);
    auto i = LaggedExpr::parse("x[1]^2", 1);
    CHECK(i.evaluate(neg) == 16.0);
}

TEST_CASE("overflow is reported, not propagated") {
    auto e = LaggedExpr::parse("exp(x[1])", 1);
    double big[] = {1e6};
    CHECK_THROWS_AS(e.evaluate(big), EvalError);
}

TEST_CASE("precedence") {
    double h[] = {0.0};
    CHECK(LaggedExpr::parse("1+2*3", 1).evaluate(h) == 7.0);
    CHECK(LaggedExpr::parse("(1+2)*3", 1).evaluate(h) == 9.0);
    // pow binds tighter than unary minus and multiplication
    CHECK(LaggedExpr::parse("-2^2", 1).evaluate(h) == -4.0);
    CHECK(LaggedExpr::parse("2*3^2", 1).evaluate(h) == 18.0);
    // left associativity
    CHECK(LaggedExpr::parse("8-4-2", 1).evaluate(h) == 2.0);
    CHECK(LaggedExpr::parse("16/4/2", 1).evaluate(h) == 2.0);
    CHECK(LaggedExpr::parse("2^3^2", 1).evaluate(h) == 64.0);
    // explicit negative exponent after the operator
    CHECK(LaggedExpr::parse("2^-1", 1).evaluate(h) == 0.5);
}

TEST_CASE("scientific notation and whitespace") {
    double h[] = {2.0};
    CHECK(LaggedExpr::parse("1e-2 * x[1]", 1).evaluate(h) == 0.02);
    CHECK(LaggedExpr::parse("  2.5E3  ", 1).evaluate(h) == 2500.0);
}

TEST_CASE("syntax errors carry byte offsets") {
    try {
        LaggedExpr::parse("2*x[1] + ", 1);
        CHECK(false);
    } catch (const ParseError& err) {
        CHECK(err.offset() == 9);
    }
    try {
        LaggedExpr::parse("2 $ 3", 1);
        CHECK(false);
    } catch (const ParseError& err) {
        CHECK(err.offset() == 2);
    }
    CHECK_THROWS_AS(LaggedExpr::parse("sin(x[1]", 1), ParseError);
    CHECK_THROWS_AS(LaggedExpr::parse("foo(x[1])", 1), ParseError);
    CHECK_THROWS_AS(LaggedExpr::parse("", 1), ParseError);
}

TEST_CASE("canonical print forms") {
    auto mul = LaggedExpr::binary(BinaryOp::Multiply, LaggedExpr::constant(2.0),
                                  LaggedExpr::lag(1, 1));
    CHECK(mul.str() == "(2 * x[1])");
    auto neg = LaggedExpr::unary(UnaryOp::Negate, LaggedExpr::lag(2, 2));
    CHECK(neg.str() == "(-x[2])");
    auto e = LaggedExpr::parse("2*x[1] + 0.05*x[1]^2", 1);
    CHECK(e.str() == "((2 * x[1]) + (0.05 * (x[1] ^ 2)))");
}

namespace {

// Uniform random expression trees over the full node vocabulary.  Power
// nodes get small integer exponents so both signs of base stay legal.
LaggedExpr random_tree(std::mt19937_64& rng, int depth, int order) {
    std::uniform_int_distribution<int> kind(0, depth <= 0 ? 1 : 3);
    std::uniform_real_distribution<double> coeff(-3.0, 3.0);
    std::uniform_int_distribution<int> lag(1, order);
    switch (kind(rng)) {
        case 0:
            return LaggedExpr::constant(coeff(rng));
        case 1:
            return LaggedExpr::lag(lag(rng), order);
        case 2: {
            std::uniform_int_distribution<int> u(0, 3);
            UnaryOp ops[] = {UnaryOp::Negate, UnaryOp::Abs, UnaryOp::Sin, UnaryOp::Cos};
            return LaggedExpr::unary(ops[u(rng)], random_tree(rng, depth - 1, order));
        }
        default: {
            std::uniform_int_distribution<int> b(0, 4);
            BinaryOp op = static_cast<BinaryOp>(b(rng));
            if (op == BinaryOp::Power) {
                std::uniform_int_distribution<int> p(0, 3);
                return LaggedExpr::binary(op, random_tree(rng, depth - 1, order),
                                          LaggedExpr::constant(p(rng)));
            }
            return LaggedExpr::binary(op, random_tree(rng, depth - 1, order),
                                      random_tree(rng, depth - 1, order));
        }
    }
}

}  // namespace

TEST_CASE("round-trip: parse(print(e)) evaluates bit-identically") {
    std::mt19937_64 rng(20240811);
    std::uniform_real_distribution<double> input(-2.0, 2.0);
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        int order = 1 + static_cast<int>(rng() % 3);
        LaggedExpr e = random_tree(rng, 4, order);
        LaggedExpr back = LaggedExpr::parse(e.str(), e.order());
        CHECK(back.str() == e.str());
        for (int k = 0; k < 8; ++k) {
            std::vector<double> h(static_cast<std::size_t>(order));
            for (auto& v : h) v = input(rng);
            double a, b;
            try {
                a = e.evaluate(h);
            } catch (const EvalError&) {
                CHECK_THROWS_AS(back.evaluate(h), EvalError);
                continue;
            }
            b = back.evaluate(h);
            CHECK(a == b);
            ++checked;
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("round-trip survives extreme constants") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.0, 123456789.123456789}) {
        auto c = LaggedExpr::constant(v);
        auto back = LaggedExpr::parse(c.str(), 1);
        double h[] = {0.0};
        CHECK(back.evaluate(h) == v);
    }
}

TEST_CASE("evaluation is deterministic") {
    auto e = LaggedExpr::parse("sin(x[1]) + cos(x[2])*exp(x[1]/4) - abs(x[2])^3", 2);
    double h[] = {0.7, -1.3};
    double first = e.evaluate(h);
    for (int i = 0; i < 100; ++i) CHECK(e.evaluate(h) == first);
}
