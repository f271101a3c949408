#include "sdelearn/error.hpp"
#include "sdelearn/expr.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <string>
#include <vector>

using namespace sdelearn;

namespace {

double at(const ScalarExpr& e, std::vector<double> x) { return e.eval(x); }

// Every drift and diffusion string used by the example systems.
const std::vector<std::pair<std::string, std::size_t>> kCorpus = {
    {"0", 1},
    {"2 + 0.08*x1 - 0.01*x1^2", 1},
    {"2 + 0.08*x1 - 0.05*sin(x1) + 0.02*cos(x1)^2", 1},
    {"0.08*x1", 1},
    {"0.2*x1", 1},
    {"0.4*x1 - 0.1*x1*x2", 2},
    {"-0.8*x2 + 0.2*x1^2", 2},
    {"2*sin(0.2*x1) + 1.5*cos(0.1*x2)", 2},
    {"0.4*x1", 2},
    {"0.025*x1*x2", 2},
    {"0.05*x1 - 0.01*x1*x2", 3},
    {"0.08*x2 - 0.05*x2^2", 3},
    {"0.05*x3 - 0.02*x2*x3", 3},
    {"exp(-abs(x1)) / sqrt(1 + x1^2)", 1},
    {"-x1^-2", 1},
    {"2^3^2", 1},
    {"-(x1 - 3)*(x1 + 1e-3)", 1},
};

/// Random well-formed expression text over x1..x`dim`.
std::string random_expr(std::mt19937_64& rng, std::size_t dim, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 8);
    std::uniform_int_distribution<std::size_t> var(1, dim);
    std::uniform_real_distribution<double> num(0.0, 5.0);
    switch (pick(rng)) {
    case 0: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", num(rng));
        return buf;
    }
    case 1: return "x" + std::to_string(var(rng));
    case 2: return random_expr(rng, dim, depth - 1) + " + " + random_expr(rng, dim, depth - 1);
    case 3: return random_expr(rng, dim, depth - 1) + " - " + random_expr(rng, dim, depth - 1);
    case 4: return random_expr(rng, dim, depth - 1) + "*" + random_expr(rng, dim, depth - 1);
    case 5: return "(" + random_expr(rng, dim, depth - 1) + ")/(" + random_expr(rng, dim, depth - 1) + ")";
    case 6: return "-" + random_expr(rng, dim, depth - 1);
    case 7: return "(" + random_expr(rng, dim, depth - 1) + ")^2";
    default: {
        static const char* fns[] = {"sin", "cos", "exp", "abs", "sqrt"};
        return std::string(fns[rng() % 5]) + "(" + random_expr(rng, dim, depth - 1) + ")";
    }
    }
}

}  // namespace

TEST(Expr, SpecExamples) {
    EXPECT_EQ(at(parse_expr("0", 1), {3.7}), 0.0);
    EXPECT_NEAR(at(parse_expr("2 + 0.08*x1 - 0.01*x1^2", 1), {10.0}), 1.8, 1e-15);
    EXPECT_DOUBLE_EQ(at(parse_expr("2*sin(0.2*x1) + 1.5*cos(0.1*x2)", 2), {0.0, 0.0}), 1.5);
}

TEST(Expr, Precedence) {
    EXPECT_DOUBLE_EQ(at(parse_expr("-x1^2", 1), {3.0}), -9.0);
    EXPECT_DOUBLE_EQ(at(parse_expr("2^3^2", 1), {0.0}), 512.0);
    EXPECT_DOUBLE_EQ(at(parse_expr("2^-1", 1), {0.0}), 0.5);
    EXPECT_DOUBLE_EQ(at(parse_expr("8/4/2", 1), {0.0}), 1.0);
    EXPECT_DOUBLE_EQ(at(parse_expr("8-4-2", 1), {0.0}), 2.0);
    EXPECT_DOUBLE_EQ(at(parse_expr("1 + 2*3", 1), {0.0}), 7.0);
    EXPECT_DOUBLE_EQ(at(parse_expr("(1 + 2)*3", 1), {0.0}), 9.0);
    EXPECT_DOUBLE_EQ(at(parse_expr("--x1", 1), {4.0}), 4.0);
    EXPECT_DOUBLE_EQ(at(parse_expr("2*x1^2*x2", 2), {3.0, 0.5}), 9.0);
    EXPECT_DOUBLE_EQ(at(parse_expr("1.5e2 + .5", 1), {0.0}), 150.5);
}

TEST(Expr, Functions) {
    EXPECT_DOUBLE_EQ(at(parse_expr("sin(x1)", 1), {1.0}), std::sin(1.0));
    EXPECT_DOUBLE_EQ(at(parse_expr("cos(x1)", 1), {1.0}), std::cos(1.0));
    EXPECT_DOUBLE_EQ(at(parse_expr("exp(x1)", 1), {1.0}), std::exp(1.0));
    EXPECT_DOUBLE_EQ(at(parse_expr("abs(x1)", 1), {-2.5}), 2.5);
    EXPECT_DOUBLE_EQ(at(parse_expr("sqrt(x1)", 1), {2.0}), std::sqrt(2.0));
}

TEST(Expr, NamedVariables) {
    const ScalarExpr phi = parse_expr("r - 1", std::vector<std::string>{"r"});
    EXPECT_DOUBLE_EQ(at(phi, {3.0}), 2.0);
    EXPECT_THROW(parse_expr("x1", std::vector<std::string>{"r"}), ParseError);
}

TEST(Expr, SyntaxErrorsCarryPositions) {
    const auto position_of = [](const std::string& src, std::size_t dim) -> std::size_t {
        try {
            parse_expr(src, dim);
        } catch (const ParseError& e) {
            return e.position();
        }
        ADD_FAILURE() << "no error for " << src;
        return 0;
    };
    EXPECT_EQ(position_of("1 + ", 1), 4u);
    EXPECT_EQ(position_of("x1 * )", 1), 5u);
    EXPECT_EQ(position_of("(x1", 1), 3u);
    EXPECT_EQ(position_of("x3", 2), 0u);
    EXPECT_EQ(position_of("1 + foo(2)", 1), 4u);
    EXPECT_EQ(position_of("sin 2", 1), 4u);
    EXPECT_THROW(parse_expr("", 1), ParseError);
    EXPECT_THROW(parse_expr("1 2", 1), ParseError);
    EXPECT_THROW(parse_expr("x0", 1), ParseError);
    EXPECT_THROW(parse_expr("1", 0), ConfigError);
}

TEST(Expr, DomainErrors) {
    EXPECT_THROW(at(parse_expr("sqrt(x1)", 1), {-1.0}), DomainError);
    EXPECT_THROW(at(parse_expr("1/x1", 1), {0.0}), DomainError);
    EXPECT_THROW(at(parse_expr("exp(x1)", 1), {1000.0}), DomainError);
}

TEST(Expr, ConstantAndZeroFlags) {
    EXPECT_TRUE(parse_expr("0", 2).is_zero());
    EXPECT_FALSE(parse_expr("0*x1", 2).is_zero());
    EXPECT_TRUE(parse_expr("0.3 + sin(1)", 2).is_constant());
    EXPECT_FALSE(parse_expr("0.3 + x2", 2).is_constant());
    EXPECT_TRUE(ScalarExpr(coordinate_names(3)).is_zero());
}

TEST(Expr, CorpusRoundTrip) {
    for (const auto& [src, dim] : kCorpus) {
        const ScalarExpr e = parse_expr(src, dim);
        const ScalarExpr again = parse_expr(e.to_string(), dim);
        EXPECT_EQ(e, again) << src << " -> " << e.to_string();
    }
}

TEST(Expr, RandomRoundTripAndPurity) {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> coord(-3.0, 3.0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t dim = 1 + trial % 3;
        const std::string src = random_expr(rng, dim, 4);
        const ScalarExpr e = parse_expr(src, dim);
        const ScalarExpr again = parse_expr(e.to_string(), dim);
        ASSERT_EQ(e, again) << src;

        std::vector<double> x(dim);
        for (auto& v : x) v = coord(rng);
        double first = 0.0;
        try {
            first = e.eval(x);
        } catch (const DomainError&) {
            continue;
        }
        const double second = e.eval(x);
        EXPECT_EQ(std::memcmp(&first, &second, sizeof first), 0) << src;
        EXPECT_EQ(again.eval(x), first) << src;
    }
}
