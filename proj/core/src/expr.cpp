#include "sdelearn/expr.hpp"

#include "sdelearn/error.hpp"

#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <utility>

namespace sdelearn {

bool ScalarExpr::Node::operator==(const Node& other) const noexcept {
    if (op != other.op) return false;
    if (op == Op::Const) return std::bit_cast<std::uint64_t>(value) == std::bit_cast<std::uint64_t>(other.value);
    if (op == Op::Var) return var == other.var;
    return true;
}

ScalarExpr::ScalarExpr(std::vector<std::string> variables) : variables_(std::move(variables)) {
    nodes_.push_back(Node{Op::Const, 0.0, 0});
}

bool ScalarExpr::operator==(const ScalarExpr& other) const noexcept {
    return variables_ == other.variables_ && nodes_ == other.nodes_;
}

bool ScalarExpr::is_constant() const noexcept {
    for (const auto& n : nodes_) {
        if (n.op == Op::Var) return false;
    }
    return true;
}

bool ScalarExpr::is_zero() const noexcept {
    return nodes_.size() == 1 && nodes_[0].op == Op::Const && nodes_[0].value == 0.0;
}

namespace {

constexpr std::size_t kInlineStack = 64;

std::string format_number(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), end);
}

const char* function_name(ScalarExpr::Op op) {
    switch (op) {
        case ScalarExpr::Op::Sin: return "sin";
        case ScalarExpr::Op::Cos: return "cos";
        case ScalarExpr::Op::Exp: return "exp";
        case ScalarExpr::Op::Abs: return "abs";
        case ScalarExpr::Op::Sqrt: return "sqrt";
        default: return "";
    }
}

}  // namespace

double ScalarExpr::eval(std::span<const double> point) const {
    std::array<double, kInlineStack> inline_stack;
    std::vector<double> heap_stack;
    double* stack = inline_stack.data();
    if (max_depth_ > kInlineStack) {
        heap_stack.resize(max_depth_);
        stack = heap_stack.data();
    }
    std::size_t top = 0;
    for (const auto& n : nodes_) {
        switch (n.op) {
            case Op::Const: stack[top++] = n.value; break;
            case Op::Var: stack[top++] = point[n.var]; break;
            case Op::Add: --top; stack[top - 1] += stack[top]; break;
            case Op::Sub: --top; stack[top - 1] -= stack[top]; break;
            case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
            case Op::Div: --top; stack[top - 1] /= stack[top]; break;
            case Op::Pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
            case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
            case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
            case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
            case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
            case Op::Abs: stack[top - 1] = std::abs(stack[top - 1]); break;
            case Op::Sqrt:
                if (stack[top - 1] < 0.0) {
                    throw DomainError("sqrt of negative value in '" + to_string() + "'");
                }
                stack[top - 1] = std::sqrt(stack[top - 1]);
                break;
        }
    }
    const double result = stack[0];
    if (!std::isfinite(result)) {
        throw DomainError("non-finite value in '" + to_string() + "'");
    }
    return result;
}

std::string ScalarExpr::to_string() const {
    std::vector<std::string> stack;
    for (const auto& n : nodes_) {
        switch (n.op) {
            case Op::Const: stack.push_back(format_number(n.value)); break;
            case Op::Var: stack.push_back(variables_.at(n.var)); break;
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div:
            case Op::Pow: {
                static constexpr const char* kSymbols = "+-*/^";
                const char sym = kSymbols[static_cast<int>(n.op) - static_cast<int>(Op::Add)];
                std::string rhs = std::move(stack.back());
                stack.pop_back();
                stack.back() = "(" + stack.back() + " " + sym + " " + rhs + ")";
                break;
            }
            case Op::Neg: stack.back() = "(-" + stack.back() + ")"; break;
            default: stack.back() = std::string(function_name(n.op)) + "(" + stack.back() + ")"; break;
        }
    }
    return stack.empty() ? std::string("0") : stack.back();
}

class ExprParser {
public:
    ExprParser(std::string_view source, std::vector<std::string> variables)
        : src_(source), result_(std::move(variables)) {
        result_.nodes_.clear();
    }

    ScalarExpr parse() {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
        parse_expr();
        skip_space();
        if (pos_ < src_.size()) {
            throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
        }
        std::size_t depth = 0;
        std::size_t max_depth = 1;
        for (const auto& n : result_.nodes_) {
            switch (n.op) {
                case ScalarExpr::Op::Const:
                case ScalarExpr::Op::Var: ++depth; break;
                case ScalarExpr::Op::Add:
                case ScalarExpr::Op::Sub:
                case ScalarExpr::Op::Mul:
                case ScalarExpr::Op::Div:
                case ScalarExpr::Op::Pow: --depth; break;
                default: break;
            }
            max_depth = std::max(max_depth, depth);
        }
        result_.max_depth_ = max_depth;
        return std::move(result_);
    }

private:
    using Op = ScalarExpr::Op;

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void emit(Op op, double value = 0.0, std::uint32_t var = 0) {
        result_.nodes_.push_back(ScalarExpr::Node{op, value, var});
    }

    void parse_expr() {
        parse_term();
        for (;;) {
            if (accept('+')) {
                parse_term();
                emit(Op::Add);
            } else if (accept('-')) {
                parse_term();
                emit(Op::Sub);
            } else {
                return;
            }
        }
    }

    void parse_term() {
        parse_unary();
        for (;;) {
            if (accept('*')) {
                parse_unary();
                emit(Op::Mul);
            } else if (accept('/')) {
                parse_unary();
                emit(Op::Div);
            } else {
                return;
            }
        }
    }

    void parse_unary() {
        if (accept('-')) {
            parse_unary();
            emit(Op::Neg);
            return;
        }
        parse_power();
    }

    void parse_power() {
        parse_primary();
        if (accept('^')) {
            parse_unary();
            emit(Op::Pow);
        }
    }

    void parse_primary() {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            parse_expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            parse_number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            parse_identifier();
            return;
        }
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    void parse_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
            ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
            if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
                pos_ = look;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            }
        }
        double value = 0.0;
        auto [end, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (ec != std::errc{} || end != src_.data() + pos_) {
            throw ParseError("malformed number '" + std::string(src_.substr(start, pos_ - start)) + "'", start);
        }
        emit(Op::Const, value);
    }

    void parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            ++pos_;
        }
        const std::string name(src_.substr(start, pos_ - start));

        static constexpr std::array<std::pair<const char*, Op>, 5> kFunctions{{
            {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"abs", Op::Abs}, {"sqrt", Op::Sqrt}}};
        for (const auto& [fname, op] : kFunctions) {
            if (name == fname) {
                if (!accept('(')) throw ParseError("expected '(' after " + name, pos_);
                parse_expr();
                if (!accept(')')) throw ParseError("expected ')'", pos_);
                emit(op);
                return;
            }
        }

        const auto& vars = result_.variables_;
        for (std::size_t i = 0; i < vars.size(); ++i) {
            if (vars[i] == name) {
                emit(Op::Var, 0.0, static_cast<std::uint32_t>(i));
                return;
            }
        }
        if (name.size() > 1 && name[0] == 'x' &&
            name.find_first_not_of("0123456789", 1) == std::string::npos) {
            throw ParseError("variable " + name + " exceeds dimension " + std::to_string(vars.size()), start);
        }
        throw ParseError("unknown identifier '" + name + "'", start);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    ScalarExpr result_;
};

ScalarExpr parse_expr(std::string_view source, std::vector<std::string> variables) {
    return ExprParser(source, std::move(variables)).parse();
}

ScalarExpr parse_expr(std::string_view source, std::size_t dim) {
    if (dim == 0) throw ConfigError("expression dimension must be at least 1");
    return parse_expr(source, coordinate_names(dim));
}

std::vector<std::string> coordinate_names(std::size_t dim) {
    std::vector<std::string> names;
    names.reserve(dim);
    for (std::size_t i = 1; i <= dim; ++i) names.push_back("x" + std::to_string(i));
    return names;
}

}  // namespace sdelearn
