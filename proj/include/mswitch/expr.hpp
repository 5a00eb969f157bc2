#ifndef MSWITCH_EXPR_HPP
#define MSWITCH_EXPR_HPP

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mswitch {

/// Raised by parse(); carries the 0-based character offset of the problem.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, std::size_t position);
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Raised by Expr::eval() on log/sqrt/division domain violations.
class DomainError : public std::runtime_error {
public:
    DomainError(const std::string& message, std::string subexpression);
    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

enum class Op {
    Literal,
    Time,
    State,   // x_i, index stored 0-based
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
    Pow,
};

/// Immutable AST node. Children are shared so copies of an Expr are cheap.
struct ExprNode {
    Op op = Op::Literal;
    double value = 0.0;          // Literal
    std::size_t index = 0;       // State
    std::shared_ptr<const ExprNode> lhs;
    std::shared_ptr<const ExprNode> rhs;
};

/// Arithmetic expression over (t, x1..xk).
///
/// Grammar, lowest to highest precedence:
///
///     expr   := term (('+' | '-') term)*
///     term   := unary (('*' | '/') unary)*
///     unary  := '-' unary | atom
///     atom   := number | 't' | 'x' digits | func '(' args ')' | '(' expr ')'
///     func   := exp | log | sqrt | abs   (one argument)
///             | min | max | pow          (two arguments)
///
/// Numbers are decimal with optional fraction and exponent (`1e-3`, `2.5E+2`).
/// Evaluation follows the tree exactly; nothing is re-associated.
class Expr {
public:
    Expr();  // the literal 0

    static Expr parse(std::string_view source, std::size_t state_dim);
    static Expr constant(double value);
    static Expr from_node(std::shared_ptr<const ExprNode> root, std::size_t state_dim);

    double eval(double t, std::span<const double> x) const;

    /// Canonical text: binary operations fully parenthesised, literals in
    /// shortest round-trip form. parse(to_string()) reproduces the tree.
    std::string to_string() const;

    std::size_t state_dim() const noexcept { return state_dim_; }
    const ExprNode& root() const noexcept { return *root_; }

    /// True when the tree contains no t or x references.
    bool is_constant() const;
    bool uses_time() const;

private:
    Expr(std::shared_ptr<const ExprNode> root, std::size_t state_dim);

    std::shared_ptr<const ExprNode> root_;
    std::size_t state_dim_ = 0;
};

std::string to_string(const ExprNode& node);

}  // namespace mswitch

#endif  // MSWITCH_EXPR_HPP
