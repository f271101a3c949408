#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sdelearn {

/**
 * Parsed scalar arithmetic expression over a fixed list of named variables.
 *
 * Grammar (standard precedence, `^` binds tighter than unary minus):
 *
 *     expr    := term (('+' | '-') term)*
 *     term    := unary (('*' | '/') unary)*
 *     unary   := '-' unary | power
 *     power   := primary ('^' unary)?          right associative
 *     primary := number | name | func '(' expr ')' | '(' expr ')'
 *     func    := sin | cos | exp | abs | sqrt
 *
 * The tree is stored in post-order, which doubles as the evaluation program,
 * so structural equality is a comparison of the node arrays.
 */
class ScalarExpr {
public:
    enum class Op : std::uint8_t {
        Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Abs, Sqrt
    };

    struct Node {
        Op op;
        double value = 0.0;   // Const only
        std::uint32_t var = 0;  // Var only

        bool operator==(const Node& other) const noexcept;
    };

    /// The zero function over `variables`.
    explicit ScalarExpr(std::vector<std::string> variables = {});

    /// Evaluates at `point` (one value per variable). Throws DomainError when the
    /// result, or any sqrt argument, leaves the real domain.
    double eval(std::span<const double> point) const;

    /// Fully parenthesised text that re-parses to an equal tree.
    std::string to_string() const;

    /// True when no variable is referenced.
    bool is_constant() const noexcept;
    /// True for a bare constant equal to 0.
    bool is_zero() const noexcept;

    std::size_t arity() const noexcept { return variables_.size(); }
    const std::vector<std::string>& variables() const noexcept { return variables_; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    /// Structural equality (variables, ops, constants bitwise).
    bool operator==(const ScalarExpr& other) const noexcept;

private:
    friend class ExprParser;

    std::vector<std::string> variables_;
    std::vector<Node> nodes_;
    std::size_t max_depth_ = 1;
};

/// Parses `source` with variables x1..x`dim`.
ScalarExpr parse_expr(std::string_view source, std::size_t dim);

/// Parses `source` with an explicit variable list (e.g. {"r"}).
ScalarExpr parse_expr(std::string_view source, std::vector<std::string> variables);

/// The variable names x1..x`dim`.
std::vector<std::string> coordinate_names(std::size_t dim);

}  // namespace sdelearn
