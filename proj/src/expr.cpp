#include "mswitch/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

namespace mswitch {

ParseError::ParseError(std::string message, std::size_t position)
    : std::runtime_error("parse error at position " + std::to_string(position) + ": " + message),
      position_(position)
{}

DomainError::DomainError(const std::string& message, std::string subexpression)
    : std::runtime_error(message + " in '" + subexpression + "'"),
      subexpression_(std::move(subexpression))
{}

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make_leaf(Op op, double value = 0.0, std::size_t index = 0)
{
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->value = value;
    n->index = index;
    return n;
}

NodePtr make_node(Op op, NodePtr lhs, NodePtr rhs = nullptr)
{
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

struct FunctionInfo {
    std::string_view name;
    Op op;
    int arity;
};

constexpr FunctionInfo kFunctions[] = {
    {"exp", Op::Exp, 1},  {"log", Op::Log, 1}, {"sqrt", Op::Sqrt, 1}, {"abs", Op::Abs, 1},
    {"min", Op::Min, 2},  {"max", Op::Max, 2}, {"pow", Op::Pow, 2},
};

class Parser {
public:
    Parser(std::string_view src, std::size_t state_dim) : src_(src), dim_(state_dim) {}

    NodePtr run()
    {
        skip_ws();
        if (pos_ >= src_.size()) {
            throw ParseError("empty expression", pos_);
        }
        NodePtr e = expr();
        skip_ws();
        if (pos_ < src_.size()) {
            throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
        }
        return e;
    }

private:
    void skip_ws()
    {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
            ++pos_;
        }
    }

    bool accept(char c)
    {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c)) {
            if (pos_ >= src_.size()) {
                throw ParseError(std::string("expected '") + c + "' but reached end of input", pos_);
            }
            throw ParseError(std::string("expected '") + c + "'", pos_);
        }
    }

    NodePtr expr()
    {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = make_node(Op::Add, lhs, term());
            } else if (accept('-')) {
                lhs = make_node(Op::Sub, lhs, term());
            } else {
                return lhs;
            }
        }
    }

    NodePtr term()
    {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = make_node(Op::Mul, lhs, unary());
            } else if (accept('/')) {
                lhs = make_node(Op::Div, lhs, unary());
            } else {
                return lhs;
            }
        }
    }

    NodePtr unary()
    {
        if (accept('-')) {
            return make_node(Op::Neg, unary());
        }
        return atom();
    }

    NodePtr number()
    {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                ++pos_;
                ++n;
            }
            return n;
        };
        std::size_t mantissa = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            mantissa += digits();
        }
        if (mantissa == 0) {
            throw ParseError("malformed number", start);
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
                ++pos_;
            }
            if (digits() == 0) {
                throw ParseError("malformed exponent", start);
            }
        }
        // strtod needs a terminated buffer; from_chars rejects a leading '.'.
        const std::string text(src_.substr(start, pos_ - start));
        char* end = nullptr;
        const double v = std::strtod(text.c_str(), &end);
        if (end != text.c_str() + text.size() || !std::isfinite(v)) {
            throw ParseError("number out of range", start);
        }
        return make_leaf(Op::Literal, v);
    }

    NodePtr atom()
    {
        skip_ws();
        if (pos_ >= src_.size()) {
            throw ParseError("unexpected end of input", pos_);
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return number();
        }
        if (c == '(') {
            ++pos_;
            NodePtr e = expr();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                ++pos_;
            }
            const std::string_view name = src_.substr(start, pos_ - start);
            return identifier(name, start);
        }
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    NodePtr identifier(std::string_view name, std::size_t start)
    {
        if (name == "t") {
            return make_leaf(Op::Time);
        }
        if (name.size() >= 2 && name[0] == 'x' &&
            std::all_of(name.begin() + 1, name.end(),
                        [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
            std::size_t idx = 0;
            auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
            if (ec != std::errc() || idx < 1 || idx > dim_) {
                throw ParseError("unknown identifier '" + std::string(name) + "' (state dimension is " +
                                     std::to_string(dim_) + ")",
                                 start);
            }
            return make_leaf(Op::State, 0.0, idx - 1);
        }
        for (const auto& f : kFunctions) {
            if (f.name != name) {
                continue;
            }
            const std::size_t call_pos = pos_;
            expect('(');
            std::vector<NodePtr> args;
            skip_ws();
            if (!accept(')')) {
                args.push_back(expr());
                while (accept(',')) {
                    args.push_back(expr());
                }
                expect(')');
            }
            if (static_cast<int>(args.size()) != f.arity) {
                throw ParseError(std::string(name) + " expects " + std::to_string(f.arity) +
                                     " argument(s), got " + std::to_string(args.size()),
                                 call_pos);
            }
            return make_node(f.op, args[0], f.arity == 2 ? args[1] : nullptr);
        }
        throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    }

    std::string_view src_;
    std::size_t dim_;
    std::size_t pos_ = 0;
};

std::string format_literal(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, std::abs(v));
    std::string s(buf, ptr);
    return std::signbit(v) ? "(-" + s + ")" : s;
}

const char* function_name(Op op)
{
    for (const auto& f : kFunctions) {
        if (f.op == op) {
            return f.name.data();
        }
    }
    return "?";
}

double eval_node(const ExprNode& n, double t, std::span<const double> x)
{
    switch (n.op) {
    case Op::Literal: return n.value;
    case Op::Time: return t;
    case Op::State: return x[n.index];
    case Op::Neg: return -eval_node(*n.lhs, t, x);
    case Op::Add: return eval_node(*n.lhs, t, x) + eval_node(*n.rhs, t, x);
    case Op::Sub: return eval_node(*n.lhs, t, x) - eval_node(*n.rhs, t, x);
    case Op::Mul: return eval_node(*n.lhs, t, x) * eval_node(*n.rhs, t, x);
    case Op::Div: {
        const double a = eval_node(*n.lhs, t, x);
        const double b = eval_node(*n.rhs, t, x);
        if (b == 0.0) {
            throw DomainError("division by zero", to_string(n));
        }
        return a / b;
    }
    case Op::Exp: return std::exp(eval_node(*n.lhs, t, x));
    case Op::Log: {
        const double a = eval_node(*n.lhs, t, x);
        if (!(a > 0.0)) {
            throw DomainError("log of non-positive value", to_string(n));
        }
        return std::log(a);
    }
    case Op::Sqrt: {
        const double a = eval_node(*n.lhs, t, x);
        if (a < 0.0) {
            throw DomainError("sqrt of negative value", to_string(n));
        }
        return std::sqrt(a);
    }
    case Op::Abs: return std::abs(eval_node(*n.lhs, t, x));
    case Op::Min: {
        const double a = eval_node(*n.lhs, t, x);
        const double b = eval_node(*n.rhs, t, x);
        return b < a ? b : a;
    }
    case Op::Max: {
        const double a = eval_node(*n.lhs, t, x);
        const double b = eval_node(*n.rhs, t, x);
        return a < b ? b : a;
    }
    case Op::Pow: {
        const double a = eval_node(*n.lhs, t, x);
        const double b = eval_node(*n.rhs, t, x);
        const double r = std::pow(a, b);
        if (std::isnan(r) && !std::isnan(a) && !std::isnan(b)) {
            throw DomainError("pow of negative base with non-integer exponent", to_string(n));
        }
        if (a == 0.0 && b < 0.0) {
            throw DomainError("pow of zero with negative exponent", to_string(n));
        }
        return r;
    }
    }
    return 0.0;
}

bool depends_on_inputs(const ExprNode& n)
{
    if (n.op == Op::Time || n.op == Op::State) {
        return true;
    }
    return (n.lhs && depends_on_inputs(*n.lhs)) || (n.rhs && depends_on_inputs(*n.rhs));
}

bool depends_on_time(const ExprNode& n)
{
    if (n.op == Op::Time) {
        return true;
    }
    return (n.lhs && depends_on_time(*n.lhs)) || (n.rhs && depends_on_time(*n.rhs));
}

}  // namespace

std::string to_string(const ExprNode& n)
{
    auto bin = [&](const char* sym) {
        return "(" + to_string(*n.lhs) + " " + sym + " " + to_string(*n.rhs) + ")";
    };
    switch (n.op) {
    case Op::Literal: return format_literal(n.value);
    case Op::Time: return "t";
    case Op::State: return "x" + std::to_string(n.index + 1);
    case Op::Neg: return "(-" + to_string(*n.lhs) + ")";
    case Op::Add: return bin("+");
    case Op::Sub: return bin("-");
    case Op::Mul: return bin("*");
    case Op::Div: return bin("/");
    case Op::Min:
    case Op::Max:
    case Op::Pow:
        return std::string(function_name(n.op)) + "(" + to_string(*n.lhs) + ", " + to_string(*n.rhs) + ")";
    default:
        return std::string(function_name(n.op)) + "(" + to_string(*n.lhs) + ")";
    }
}

Expr::Expr() : Expr(make_leaf(Op::Literal, 0.0), 0) {}

Expr::Expr(std::shared_ptr<const ExprNode> root, std::size_t state_dim)
    : root_(std::move(root)), state_dim_(state_dim)
{}

Expr Expr::parse(std::string_view source, std::size_t state_dim)
{
    return Expr(Parser(source, state_dim).run(), state_dim);
}

Expr Expr::constant(double value)
{
    return Expr(make_leaf(Op::Literal, value), 0);
}

Expr Expr::from_node(std::shared_ptr<const ExprNode> root, std::size_t state_dim)
{
    return Expr(std::move(root), state_dim);
}

double Expr::eval(double t, std::span<const double> x) const
{
    if (x.size() < state_dim_) {
        throw std::invalid_argument("state vector has dimension " + std::to_string(x.size()) +
                                    ", expression expects " + std::to_string(state_dim_));
    }
    return eval_node(*root_, t, x);
}

std::string Expr::to_string() const
{
    return mswitch::to_string(*root_);
}

bool Expr::is_constant() const
{
    return !depends_on_inputs(*root_);
}

bool Expr::uses_time() const
{
    return depends_on_time(*root_);
}

}  // namespace mswitch
