#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "cpa/expr.hpp"

using namespace cpa;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Expression corpus: the dynamics of the four benchmark systems plus a few
// extra shapes exercising division and exp.
const std::vector<std::pair<std::string, int>> kCorpus = {
    {"x2", 2},
    {"-sin(x1)-x2", 2},
    {"0.3*x1^5-0.5*x2^4-0.5*x1", 2},
    {"-x2", 2},
    {"0.5*x1^4*sin(x2)+0.3*x2", 2},
    {"-x1-x2^3", 2},
    {"-x1+x2^4-x3^4", 3},
    {"-x1^2-x2", 2},
    {"-x1^2*x3-x2", 3},
    {"exp(x1)-1", 1},
    {"x1/(2+x2)", 2},
    {"cos(x1)*x2-x2", 2},
    {"-x1^2", 1},
};

}  // namespace

TEST_CASE("parse single variable") {
    Expr e = parse_expression("x2", 2);
    CHECK(e->kind == ExprKind::Var);
    CHECK(e->index == 2);
}

TEST_CASE("parse pendulum component structure") {
    Expr e = parse_expression("-sin(x1)-x2", 2);
    REQUIRE(e->kind == ExprKind::Sub);
    REQUIRE(e->a->kind == ExprKind::Neg);
    REQUIRE(e->a->a->kind == ExprKind::Sin);
    CHECK(e->a->a->a->kind == ExprKind::Var);
    CHECK(e->a->a->a->index == 1);
    CHECK(e->b->kind == ExprKind::Var);
    CHECK(e->b->index == 2);
}

TEST_CASE("parse three-term polynomial") {
    Expr e = parse_expression("0.3*x1^5-0.5*x2^4-0.5*x1", 2);
    // ((0.3*x1^5 - 0.5*x2^4) - 0.5*x1), left-associative subtraction
    REQUIRE(e->kind == ExprKind::Sub);
    REQUIRE(e->a->kind == ExprKind::Sub);
    CHECK(e->a->a->kind == ExprKind::Mul);
    CHECK(e->a->a->a->value == doctest::Approx(0.3));
    CHECK(e->a->a->b->kind == ExprKind::Pow);
    CHECK(e->a->a->b->index == 5);
    CHECK(e->b->kind == ExprKind::Mul);
}

TEST_CASE("caret binds tighter than unary minus") {
    Expr e = parse_expression("-x1^2", 1);
    REQUIRE(e->kind == ExprKind::Neg);
    CHECK(e->a->kind == ExprKind::Pow);
    CHECK(evaluate(e, {2.0}) == -4.0);
}

TEST_CASE("parse errors carry positions") {
    CHECK_THROWS_AS(parse_expression("x3", 2), ExprError);
    CHECK_THROWS_AS(parse_expression("x0", 2), ExprError);
    CHECK_THROWS_AS(parse_expression("sin(x1", 2), ExprError);
    CHECK_THROWS_AS(parse_expression("1 + * 2", 2), ExprError);
    CHECK_THROWS_AS(parse_expression("x1^2.5", 2), ExprError);
    CHECK_THROWS_AS(parse_expression("x1^-2", 2), ExprError);
    CHECK_THROWS_AS(parse_expression("foo(x1)", 2), ExprError);
    CHECK_THROWS_AS(parse_expression("x1)", 2), ExprError);
    CHECK_THROWS_AS(parse_expression("x1^2^3", 2), ExprError);
    CHECK_THROWS_AS(parse_expression("", 2), ExprError);
    CHECK_THROWS_AS(parse_expression("x", 2), ExprError);
}

TEST_CASE("evaluate basics") {
    CHECK(evaluate(parse_expression("-sin(x1)-x2", 2), {0.0, 0.0}) == 0.0);
    CHECK(evaluate(parse_expression("x2", 2), {1.0, 3.0}) == 3.0);
}

TEST_CASE("evaluate mixed trig-polynomial term") {
    Expr e = parse_expression("0.5*x1^4*sin(x2)+0.3*x2", 2);
    double got = evaluate(e, {1.0, kPi / 2});
    double want = 0.5 * std::sin(kPi / 2) + 0.3 * kPi / 2;
    CHECK(got == doctest::Approx(want).epsilon(1e-15));
    CHECK(got == doctest::Approx(0.971239).epsilon(1e-6));
}

TEST_CASE("evaluate division by zero throws") {
    Expr e = parse_expression("x1/x2", 2);
    CHECK_THROWS_AS(evaluate(e, {1.0, 0.0}), ExprError);
}

TEST_CASE("power rule") {
    Expr e = parse_expression("x1^4*sin(x2)", 2);
    CHECK(to_string(differentiate(e, 1)) == "4*x1^3*sin(x2)");
}

TEST_CASE("derivative of unrelated variable folds to zero") {
    Expr d = differentiate(parse_expression("x2", 2), 1);
    CHECK(d->kind == ExprKind::Const);
    CHECK(d->value == 0.0);
}

TEST_CASE("second derivative of -sin") {
    Expr e = parse_expression("-sin(x1)", 1);
    Expr d2 = differentiate(differentiate(e, 1), 1);
    CHECK(to_string(d2) == "sin(x1)");
}

TEST_CASE("derivatives match finite differences") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> pt(-0.9, 0.9);
    const double h = 1e-5;
    for (const auto& [text, n] : kCorpus) {
        Expr e = parse_expression(text, n);
        for (int k = 1; k <= n; ++k) {
            Expr d = differentiate(e, k);
            for (int trial = 0; trial < 25; ++trial) {
                std::vector<double> x(n);
                for (double& xi : x) xi = pt(rng);
                std::vector<double> xp = x, xm = x;
                xp[k - 1] += h;
                xm[k - 1] -= h;
                double fd = (evaluate(e, xp) - evaluate(e, xm)) / (2 * h);
                double sym = evaluate(d, x);
                double scale = std::max({1.0, std::abs(fd), std::abs(sym)});
                CHECK(std::abs(fd - sym) / scale < 1e-6);
            }
        }
    }
}

TEST_CASE("print/parse round-trip is structural") {
    for (const auto& [text, n] : kCorpus) {
        Expr once = parse_expression(text, n);
        Expr twice = parse_expression(to_string(once), n);
        CHECK(structurally_equal(once, twice));
    }
    // Shapes that force parenthesization in the printer.
    for (const char* text : {"x1*(x2+x1)", "(x1+x2)*x2", "x1/(x2*x1)", "-(x1*x2)",
                             "(x1+x2)^2", "-x1^2", "x1-(x2-x1)", "x1/(x2/x1)"}) {
        Expr once = parse_expression(text, 2);
        Expr twice = parse_expression(to_string(once), 2);
        CHECK(structurally_equal(once, twice));
    }
}

TEST_CASE("round-trips preserve derivative trees too") {
    for (const auto& [text, n] : kCorpus) {
        for (int k = 1; k <= n; ++k) {
            Expr d = differentiate(parse_expression(text, n), k);
            if (d->kind == ExprKind::Const && d->value < 0) continue;  // "-1" re-lexes as Neg
            Expr again = parse_expression(to_string(d), n);
            std::mt19937 rng(11);
            std::uniform_real_distribution<double> pt(-0.9, 0.9);
            for (int trial = 0; trial < 10; ++trial) {
                std::vector<double> x(n);
                for (double& xi : x) xi = pt(rng);
                CHECK(evaluate(d, x) == doctest::Approx(evaluate(again, x)).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("interval evaluation of sin over a monotone box") {
    Expr e = parse_expression("sin(x1)", 1);
    Interval r = interval_evaluate(e, {Interval(0.0, kPi / 6)});
    CHECK(r.lo <= 0.0);
    CHECK(r.lo >= -1e-12);
    CHECK(r.hi >= std::sin(kPi / 6));
    CHECK(r.hi <= 0.5 + 1e-12);
}

TEST_CASE("interval evaluation of a constant") {
    Expr e = parse_expression("2", 1);
    Interval r = interval_evaluate(e, {Interval(-10.0, 10.0)});
    CHECK(r.lo == 2.0);
    CHECK(r.hi == 2.0);
}

TEST_CASE("interval evaluation of an even power") {
    Expr e = parse_expression("x1^2", 1);
    Interval r = interval_evaluate(e, {Interval(-1.0, 2.0)});
    CHECK(r.lo <= 0.0);
    CHECK(r.hi >= 4.0);
    // brute-force lower bound on the true range
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i <= 3000; ++i) {
        double x = -1.0 + 3.0 * i / 3000.0;
        lo = std::min(lo, x * x);
        hi = std::max(hi, x * x);
    }
    CHECK(r.lo <= lo);
    CHECK(r.hi >= hi);
}

TEST_CASE("interval evaluation soundness on random boxes") {
    std::mt19937 rng(20240818);
    std::uniform_real_distribution<double> bound(-1.5, 1.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& [text, n] : kCorpus) {
        Expr e = parse_expression(text, n);
        for (int trial = 0; trial < 80; ++trial) {
            std::vector<Interval> box(n);
            for (auto& iv : box) {
                double a = bound(rng), b = bound(rng);
                iv = Interval(std::min(a, b), std::max(a, b));
            }
            Interval enc;
            try {
                enc = interval_evaluate(e, box);
            } catch (const IntervalError&) {
                continue;  // divisor box straddles zero
            }
            for (int s = 0; s < 12; ++s) {
                std::vector<double> x(n);
                for (int k = 0; k < n; ++k) x[k] = box[k].lo + unit(rng) * box[k].width();
                double v;
                try {
                    v = evaluate(e, x);
                } catch (const ExprError&) {
                    continue;
                }
                CHECK(enc.lo <= v);
                CHECK(v <= enc.hi);
            }
        }
    }
}

TEST_CASE("model validation") {
    SystemModel good;
    good.name = "pendulum";
    good.n = 2;
    good.components = {parse_expression("x2", 2), parse_expression("-sin(x1)-x2", 2)};
    good.domain = {Interval(-1.0, 1.0), Interval(-1.0, 1.0)};
    CHECK_NOTHROW(validate_model(good));

    SystemModel off = good;
    off.components[0] = parse_expression("x2+1", 2);
    CHECK_THROWS_AS(validate_model(off), ExprError);

    SystemModel shifted = good;
    shifted.domain[0] = Interval(0.0, 1.0);
    CHECK_THROWS_AS(validate_model(shifted), ExprError);
}

TEST_CASE("univariate decomposition of the pendulum") {
    SystemModel m;
    m.n = 2;
    m.components = {parse_expression("x2", 2), parse_expression("-sin(x1)-x2", 2)};
    m.domain = {Interval(-1, 1), Interval(-1, 1)};
    auto parts = decompose_univariate(m);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].variable == 1);
    CHECK(parts[0].component == 2);
    CHECK(to_string(parts[0].g) == "sin(x1)");
}

TEST_CASE("univariate decomposition of a quintic component") {
    SystemModel m;
    m.n = 2;
    m.components = {parse_expression("0.3*x1^5-0.5*x2^4-0.5*x1", 2), parse_expression("-x2", 2)};
    m.domain = {Interval(-1, 1), Interval(-1, 1)};
    auto parts = decompose_univariate(m);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].variable == 1);
    CHECK(to_string(parts[0].g) == "x1^5");
    CHECK(parts[0].component == 1);
    CHECK(parts[1].variable == 2);
    CHECK(to_string(parts[1].g) == "x2^4");
    CHECK(parts[1].component == 1);
}

TEST_CASE("linear systems decompose to nothing") {
    SystemModel m;
    m.n = 1;
    m.components = {parse_expression("-x1", 1)};
    m.domain = {Interval(-1, 1)};
    CHECK(decompose_univariate(m).empty());
}

TEST_CASE("products of univariate factors are supported") {
    SystemModel m;
    m.n = 2;
    m.components = {parse_expression("0.5*x1^4*sin(x2)+0.3*x2", 2), parse_expression("-x2", 2)};
    m.domain = {Interval(-1, 1), Interval(-1, 1)};
    auto parts = decompose_univariate(m);
    REQUIRE(parts.size() == 2);
    CHECK(to_string(parts[0].g) == "x1^4");
    CHECK(to_string(parts[1].g) == "sin(x2)");
}

TEST_CASE("multivariate factor is rejected") {
    SystemModel m;
    m.n = 2;
    m.components = {parse_expression("sin(x1+x2)", 2), parse_expression("-x2", 2)};
    m.domain = {Interval(-1, 1), Interval(-1, 1)};
    CHECK_THROWS_AS(decompose_univariate(m), ExprError);
}

TEST_CASE("duplicate factors are reported once per source component") {
    SystemModel m;
    m.n = 2;
    m.components = {parse_expression("x1^3+2*x1^3*x2", 2), parse_expression("-x2", 2)};
    m.domain = {Interval(-1, 1), Interval(-1, 1)};
    auto parts = decompose_univariate(m);
    REQUIRE(parts.size() == 1);
    CHECK(to_string(parts[0].g) == "x1^3");
}
