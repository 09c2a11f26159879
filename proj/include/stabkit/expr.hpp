#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stabkit {

/// Error raised when expression text cannot be parsed.  `offset` is the
/// byte position in the input at which the problem was detected.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_ = 0;
};

/// Error raised when evaluation hits an undefined or non-finite result.
/// Domain errors are structurally undefined operations (division by
/// zero, sqrt of a negative, negative base to a fractional power);
/// NonFinite marks results that overflowed past double range.
class EvalError : public std::runtime_error {
public:
    enum class Kind { Domain, NonFinite };

    explicit EvalError(const std::string& what, Kind kind = Kind::Domain)
        : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_ = Kind::Domain;
};

enum class UnaryOp { Negate, Abs, Sin, Cos, Exp, Sqrt };
enum class BinaryOp { Add, Subtract, Multiply, Divide, Power };

/// An arithmetic expression over lagged state variables x[1..order].
/// x[j] denotes the state j steps in the past; evaluation reads x[j]
/// from `history[j-1]` (newest first).  Instances are immutable.
class LaggedExpr {
public:
    /// Parse `text` against a declared order.  Every lag reference must
    /// satisfy 1 <= j <= declared_order.  Throws ParseError on malformed
    /// input or out-of-range lags.
    static LaggedExpr parse(std::string_view text, int declared_order);

    /// Programmatic constructors, mainly for generated test inputs.
    static LaggedExpr constant(double value);
    static LaggedExpr lag(int j, int declared_order);
    static LaggedExpr unary(UnaryOp op, const LaggedExpr& operand);
    static LaggedExpr binary(BinaryOp op, const LaggedExpr& lhs, const LaggedExpr& rhs);

    /// Evaluate with history[0] = x[1], history[1] = x[2], ...
    /// Requires history.size() >= order().  Throws EvalError if any
    /// intermediate result is undefined or non-finite.
    double evaluate(std::span<const double> history) const;

    /// Canonical text: fully parenthesized, constants rendered with
    /// shortest round-trip precision.  parse(str(), order()) evaluates
    /// identically to this expression.
    std::string str() const;

    /// Declared order; the largest usable lag index.
    int order() const { return order_; }

    /// Largest lag index actually referenced (0 for constant expressions).
    int max_lag() const { return max_lag_; }

private:
    struct Node {
        enum class Kind { Constant, Lag, Unary, Binary } kind;
        double value = 0.0;  // Constant
        int lag = 0;         // Lag
        UnaryOp uop = UnaryOp::Negate;
        BinaryOp bop = BinaryOp::Add;
        int lhs = -1;
        int rhs = -1;
    };

    LaggedExpr() = default;
    static int splice_nodes(std::vector<Node>& dst, const std::vector<Node>& src, int src_root);
    double eval_node(int index, std::span<const double> history) const;
    void print_node(int index, std::string& out) const;

    std::vector<Node> nodes_;
    int root_ = -1;
    int order_ = 0;
    int max_lag_ = 0;

    friend class ExprParser;
};

/// Render a double with shortest round-trip precision (no trailing
/// noise digits; parsing the result recovers the exact bits).
std::string format_double(double value);

}  // namespace stabkit
