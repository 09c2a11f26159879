#include "stabkit/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace stabkit {

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

std::string describe_unary(UnaryOp op) {
    switch (op) {
        case UnaryOp::Negate: return "-";
        case UnaryOp::Abs: return "abs";
        case UnaryOp::Sin: return "sin";
        case UnaryOp::Cos: return "cos";
        case UnaryOp::Exp: return "exp";
        case UnaryOp::Sqrt: return "sqrt";
    }
    return "?";
}

char describe_binary(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return '+';
        case BinaryOp::Subtract: return '-';
        case BinaryOp::Multiply: return '*';
        case BinaryOp::Divide: return '/';
        case BinaryOp::Power: return '^';
    }
    return '?';
}

}  // namespace

/// Recursive-descent parser.  Grammar (lowest precedence first):
///
///   expr     = term { ("+" | "-") term }
///   term     = unary { ("*" | "/") unary }
///   unary    = ("+" | "-") unary | power
///   power    = primary { "^" exponent }        (chain folds left)
///   exponent = ("+" | "-") exponent | primary
///   primary  = number | "x" "[" integer "]" | func "(" expr ")" | "(" expr ")"
///   func     = "abs" | "sin" | "cos" | "exp" | "sqrt"
///
/// '^' binds tighter than unary minus: -x[1]^2 is -(x[1]^2).
class ExprParser {
public:
    ExprParser(std::string_view text, int declared_order)
        : text_(text), order_(declared_order) {}

    LaggedExpr run() {
        if (order_ < 1) {
            throw ParseError("declared order must be >= 1, got " + std::to_string(order_), 0);
        }
        int root = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) {
            throw ParseError("unexpected character '" + std::string(1, text_[pos_]) +
                                 "' after expression",
                             pos_);
        }
        result_.root_ = root;
        result_.order_ = order_;
        return std::move(result_);
    }

private:
    using Node = LaggedExpr::Node;

    int add_node(Node n) {
        result_.nodes_.push_back(n);
        return static_cast<int>(result_.nodes_.size()) - 1;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c, const char* context) {
        if (!eat(c)) {
            throw ParseError(std::string("expected '") + c + "' " + context, pos_);
        }
    }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            skip_ws();
            if (eat('+')) {
                int rhs = parse_term();
                lhs = add_node({Node::Kind::Binary, 0, 0, UnaryOp::Negate, BinaryOp::Add, lhs, rhs});
            } else if (eat('-')) {
                int rhs = parse_term();
                lhs = add_node({Node::Kind::Binary, 0, 0, UnaryOp::Negate, BinaryOp::Subtract, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    int parse_term() {
        int lhs = parse_unary();
        for (;;) {
            skip_ws();
            if (eat('*')) {
                int rhs = parse_unary();
                lhs = add_node({Node::Kind::Binary, 0, 0, UnaryOp::Negate, BinaryOp::Multiply, lhs, rhs});
            } else if (eat('/')) {
                int rhs = parse_unary();
                lhs = add_node({Node::Kind::Binary, 0, 0, UnaryOp::Negate, BinaryOp::Divide, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    /// Negation of a bare constant folds into the constant so that
    /// printed negative constants reparse to the identical tree.
    int negate(int operand) {
        Node& n = result_.nodes_[static_cast<std::size_t>(operand)];
        if (n.kind == Node::Kind::Constant) {
            n.value = -n.value;
            return operand;
        }
        return add_node({Node::Kind::Unary, 0, 0, UnaryOp::Negate, BinaryOp::Add, operand, -1});
    }

    int parse_unary() {
        skip_ws();
        if (eat('-')) {
            return negate(parse_unary());
        }
        if (eat('+')) {
            return parse_unary();
        }
        return parse_power();
    }

    int parse_power() {
        int base = parse_primary();
        for (;;) {
            skip_ws();
            if (!eat('^')) {
                return base;
            }
            int exp = parse_exponent();
            base = add_node({Node::Kind::Binary, 0, 0, UnaryOp::Negate, BinaryOp::Power, base, exp});
        }
    }

    int parse_exponent() {
        skip_ws();
        if (eat('-')) {
            return negate(parse_exponent());
        }
        if (eat('+')) {
            return parse_exponent();
        }
        return parse_primary();
    }

    int parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) {
            throw ParseError("unexpected end of input", pos_);
        }
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return parse_number();
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            return parse_name();
        }
        if (c == '(') {
            ++pos_;
            int inner = parse_expr();
            expect(')', "to close parenthesized expression");
            return inner;
        }
        throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
    }

    int parse_number() {
        std::size_t start = pos_;
        double value = 0.0;
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        auto res = std::from_chars(begin, end, value, std::chars_format::general);
        if (res.ec != std::errc{} || res.ptr == begin) {
            throw ParseError("malformed number", start);
        }
        pos_ = static_cast<std::size_t>(res.ptr - text_.data());
        if (!std::isfinite(value)) {
            throw ParseError("number out of range", start);
        }
        return add_node({Node::Kind::Constant, value, 0, UnaryOp::Negate, BinaryOp::Add, -1, -1});
    }

    int parse_name() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        std::string_view name = text_.substr(start, pos_ - start);
        if (name == "x") {
            expect('[', "after 'x'");
            skip_ws();
            std::size_t idx_start = pos_;
            int lag = 0;
            const char* begin = text_.data() + pos_;
            const char* end = text_.data() + text_.size();
            auto res = std::from_chars(begin, end, lag);
            if (res.ec != std::errc{} || res.ptr == begin) {
                throw ParseError("expected integer lag index", idx_start);
            }
            pos_ = static_cast<std::size_t>(res.ptr - text_.data());
            expect(']', "to close lag index");
            if (lag < 1) {
                throw ParseError("lag index must be >= 1, got x[" + std::to_string(lag) + "]",
                                 idx_start);
            }
            if (lag > order_) {
                throw ParseError("lag x[" + std::to_string(lag) +
                                     "] exceeds declared order " + std::to_string(order_),
                                 idx_start);
            }
            result_.max_lag_ = std::max(result_.max_lag_, lag);
            return add_node({Node::Kind::Lag, 0, lag, UnaryOp::Negate, BinaryOp::Add, -1, -1});
        }
        UnaryOp op;
        if (name == "abs") op = UnaryOp::Abs;
        else if (name == "sin") op = UnaryOp::Sin;
        else if (name == "cos") op = UnaryOp::Cos;
        else if (name == "exp") op = UnaryOp::Exp;
        else if (name == "sqrt") op = UnaryOp::Sqrt;
        else {
            throw ParseError("unknown function '" + std::string(name) + "'", start);
        }
        expect('(', "after function name");
        int operand = parse_expr();
        expect(')', "to close function argument");
        return add_node({Node::Kind::Unary, 0, 0, op, BinaryOp::Add, operand, -1});
    }

    std::string_view text_;
    int order_;
    std::size_t pos_ = 0;
    LaggedExpr result_;
};

LaggedExpr LaggedExpr::parse(std::string_view text, int declared_order) {
    return ExprParser(text, declared_order).run();
}

LaggedExpr LaggedExpr::constant(double value) {
    if (!std::isfinite(value)) {
        throw std::invalid_argument("constant must be finite");
    }
    LaggedExpr e;
    e.nodes_.push_back({Node::Kind::Constant, value, 0, UnaryOp::Negate, BinaryOp::Add, -1, -1});
    e.root_ = 0;
    e.order_ = 1;
    return e;
}

LaggedExpr LaggedExpr::lag(int j, int declared_order) {
    if (j < 1 || j > declared_order) {
        throw std::invalid_argument("lag index out of range");
    }
    LaggedExpr e;
    e.nodes_.push_back({Node::Kind::Lag, 0, j, UnaryOp::Negate, BinaryOp::Add, -1, -1});
    e.root_ = 0;
    e.order_ = declared_order;
    e.max_lag_ = j;
    return e;
}

/// Append src's node pool to dst with child indices shifted; returns the
/// index of src's root inside dst.
int LaggedExpr::splice_nodes(std::vector<Node>& dst, const std::vector<Node>& src, int src_root) {
    int base = static_cast<int>(dst.size());
    for (const auto& n : src) {
        Node shifted = n;
        if (shifted.lhs >= 0) shifted.lhs += base;
        if (shifted.rhs >= 0) shifted.rhs += base;
        dst.push_back(shifted);
    }
    return base + src_root;
}

LaggedExpr LaggedExpr::unary(UnaryOp op, const LaggedExpr& operand) {
    // Same folding rule as the parser: negation of a bare constant stays
    // a constant, so canonical text round-trips to the identical tree.
    if (op == UnaryOp::Negate &&
        operand.nodes_[static_cast<std::size_t>(operand.root_)].kind == Node::Kind::Constant) {
        LaggedExpr folded = operand;
        folded.nodes_[static_cast<std::size_t>(folded.root_)].value *= -1.0;
        return folded;
    }
    LaggedExpr e;
    int child = splice_nodes(e.nodes_, operand.nodes_, operand.root_);
    e.nodes_.push_back({Node::Kind::Unary, 0, 0, op, BinaryOp::Add, child, -1});
    e.root_ = static_cast<int>(e.nodes_.size()) - 1;
    e.order_ = operand.order_;
    e.max_lag_ = operand.max_lag_;
    return e;
}

LaggedExpr LaggedExpr::binary(BinaryOp op, const LaggedExpr& lhs, const LaggedExpr& rhs) {
    LaggedExpr e;
    int l = splice_nodes(e.nodes_, lhs.nodes_, lhs.root_);
    int r = splice_nodes(e.nodes_, rhs.nodes_, rhs.root_);
    e.nodes_.push_back({Node::Kind::Binary, 0, 0, UnaryOp::Negate, op, l, r});
    e.root_ = static_cast<int>(e.nodes_.size()) - 1;
    e.order_ = std::max(lhs.order_, rhs.order_);
    e.max_lag_ = std::max(lhs.max_lag_, rhs.max_lag_);
    return e;
}

double LaggedExpr::eval_node(int index, std::span<const double> history) const {
    const Node& n = nodes_[static_cast<std::size_t>(index)];
    switch (n.kind) {
        case Node::Kind::Constant:
            return n.value;
        case Node::Kind::Lag:
            return history[static_cast<std::size_t>(n.lag - 1)];
        case Node::Kind::Unary: {
            double v = eval_node(n.lhs, history);
            double r = 0.0;
            switch (n.uop) {
                case UnaryOp::Negate: r = -v; break;
                case UnaryOp::Abs: r = std::fabs(v); break;
                case UnaryOp::Sin: r = std::sin(v); break;
                case UnaryOp::Cos: r = std::cos(v); break;
                case UnaryOp::Exp: r = std::exp(v); break;
                case UnaryOp::Sqrt:
                    if (v < 0.0) {
                        throw EvalError("sqrt of negative value " + format_double(v));
                    }
                    r = std::sqrt(v);
                    break;
            }
            if (!std::isfinite(r)) {
                throw EvalError("non-finite result from " + describe_unary(n.uop) +
                                    "(" + format_double(v) + ")",
                                EvalError::Kind::NonFinite);
            }
            return r;
        }
        case Node::Kind::Binary: {
            double a = eval_node(n.lhs, history);
            double b = eval_node(n.rhs, history);
            double r = 0.0;
            switch (n.bop) {
                case BinaryOp::Add: r = a + b; break;
                case BinaryOp::Subtract: r = a - b; break;
                case BinaryOp::Multiply: r = a * b; break;
                case BinaryOp::Divide:
                    if (b == 0.0) {
                        throw EvalError("division by zero: " + format_double(a) + " / 0");
                    }
                    r = a / b;
                    break;
                case BinaryOp::Power:
                    if (a < 0.0 && b != std::floor(b)) {
                        throw EvalError("negative base " + format_double(a) +
                                        " raised to non-integer power " + format_double(b));
                    }
                    if (a == 0.0 && b < 0.0) {
                        throw EvalError("zero raised to negative power " + format_double(b));
                    }
                    r = std::pow(a, b);
                    break;
            }
            if (!std::isfinite(r)) {
                throw EvalError(std::string("non-finite result from ") + format_double(a) +
                                    " " + describe_binary(n.bop) + " " + format_double(b),
                                EvalError::Kind::NonFinite);
            }
            return r;
        }
    }
    throw EvalError("corrupt expression node");
}

double LaggedExpr::evaluate(std::span<const double> history) const {
    if (static_cast<int>(history.size()) < max_lag_) {
        throw std::invalid_argument("history shorter than referenced lags: have " +
                                    std::to_string(history.size()) + ", need " +
                                    std::to_string(max_lag_));
    }
    return eval_node(root_, history);
}

void LaggedExpr::print_node(int index, std::string& out) const {
    const Node& n = nodes_[static_cast<std::size_t>(index)];
    switch (n.kind) {
        case Node::Kind::Constant:
            out += format_double(n.value);
            return;
        case Node::Kind::Lag:
            out += "x[";
            out += std::to_string(n.lag);
            out += ']';
            return;
        case Node::Kind::Unary:
            if (n.uop == UnaryOp::Negate) {
                out += "(-";
                print_node(n.lhs, out);
                out += ')';
            } else {
                out += describe_unary(n.uop);
                out += '(';
                print_node(n.lhs, out);
                out += ')';
            }
            return;
        case Node::Kind::Binary: {
            out += '(';
            // A negative constant in base position must keep its own
            // parentheses: '^' binds tighter than the sign otherwise.
            const Node& lhs = nodes_[static_cast<std::size_t>(n.lhs)];
            if (n.bop == BinaryOp::Power && lhs.kind == Node::Kind::Constant &&
                std::signbit(lhs.value)) {
                out += '(';
                print_node(n.lhs, out);
                out += ')';
            } else {
                print_node(n.lhs, out);
            }
            out += ' ';
            out += describe_binary(n.bop);
            out += ' ';
            print_node(n.rhs, out);
            out += ')';
            return;
        }
    }
}

std::string LaggedExpr::str() const {
    std::string out;
    print_node(root_, out);
    return out;
}

}  // namespace stabkit
