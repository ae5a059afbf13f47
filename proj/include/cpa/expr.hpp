#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpa/interval.hpp"

namespace cpa {

struct ExprError : std::runtime_error {
    explicit ExprError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class ExprKind { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp };

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

// Immutable expression tree. `value` is used by Const, `index` by Var (1-based)
// and Pow (the exponent, >= 0); `a`/`b` are the children.
struct ExprNode {
    ExprKind kind;
    double value = 0.0;
    int index = 0;
    Expr a;
    Expr b;
};

// Raw constructors (no simplification).
Expr make_const(double v);
Expr make_var(int k);
Expr make_unary(ExprKind kind, Expr a);
Expr make_binary(ExprKind kind, Expr a, Expr b);
Expr make_pow(Expr base, int exponent);

// Parses the grammar
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | power
//   power  := atom ('^' unsigned-int)?
//   atom   := number | 'x'unsigned-int | func '(' expr ')' | '(' expr ')'
//   func   := 'sin' | 'cos' | 'exp'
// Whitespace is ignored. Variable indices must lie in 1..n. Errors carry the
// character position. Note '^' binds tighter than unary minus.
Expr parse_expression(const std::string& text, int n);

// Canonical text form; parsing it back yields a structurally identical tree.
// Doubles print with shortest round-trip formatting.
std::string to_string(const Expr& e);

double evaluate(const Expr& e, const std::vector<double>& x);

// Symbolic partial derivative with respect to x_k (1-based). The result is
// simplified by constant folding and zero/one elimination only.
Expr differentiate(const Expr& e, int k);

// Sound enclosure of {e(x) : x in box}; box[k-1] is the range of x_k.
Interval interval_evaluate(const Expr& e, const std::vector<Interval>& box);

bool structurally_equal(const Expr& a, const Expr& b);

// Collects the set of 1-based variable indices appearing in e.
std::vector<int> variables_of(const Expr& e);

// Autonomous system dot{x} = f(x) with an equilibrium at the origin, studied
// on the axis-aligned box `domain`.
struct SystemModel {
    std::string name;
    int n = 0;
    std::vector<Expr> components;  // f_1 .. f_n
    std::vector<Interval> domain;  // component ranges of the box
};

std::vector<double> evaluate_field(const SystemModel& m, const std::vector<double>& x);

// Throws ExprError unless the origin is interior to the domain and f(0) = 0
// within 1e-9 in every component.
void validate_model(const SystemModel& m);

// A non-affine factor g(x_k) pulled out of one dynamics component.
struct UnivariateComponent {
    int variable = 0;   // k, 1-based
    Expr g;             // references only x_variable
    int component = 0;  // source f index, 1-based
};

// Flattens each component into a sum of terms, each term a product of a
// constant and factors that each reference a single variable, and returns the
// distinct non-affine factors. Throws ExprError if a term contains a
// multivariate factor that cannot be split (e.g. sin(x1+x2)).
std::vector<UnivariateComponent> decompose_univariate(const SystemModel& m);

}  // namespace cpa
