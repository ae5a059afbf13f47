#include "cpa/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace cpa {

Expr make_const(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Const;
    n->value = v;
    return n;
}

Expr make_var(int k) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Var;
    n->index = k;
    return n;
}

Expr make_unary(ExprKind kind, Expr a) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    n->a = std::move(a);
    return n;
}

Expr make_binary(ExprKind kind, Expr a, Expr b) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

Expr make_pow(Expr base, int exponent) {
    if (exponent < 0) throw ExprError("negative exponent");
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprKind::Pow;
    n->index = exponent;
    n->a = std::move(base);
    return n;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Parser {
    const std::string& text;
    int n;
    size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw ExprError(what + " at position " + std::to_string(pos) + " in \"" + text + "\"");
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    int parse_uint(const char* what) {
        skip_ws();
        size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos == start) fail(std::string("expected ") + what);
        int v = 0;
        auto res = std::from_chars(text.data() + start, text.data() + pos, v);
        if (res.ec != std::errc()) fail(std::string("invalid ") + what);
        return v;
    }

    Expr parse_expr() {
        Expr e = parse_term();
        for (;;) {
            if (eat('+')) {
                e = make_binary(ExprKind::Add, e, parse_term());
            } else if (eat('-')) {
                e = make_binary(ExprKind::Sub, e, parse_term());
            } else {
                return e;
            }
        }
    }

    Expr parse_term() {
        Expr e = parse_factor();
        for (;;) {
            if (eat('*')) {
                e = make_binary(ExprKind::Mul, e, parse_factor());
            } else if (eat('/')) {
                e = make_binary(ExprKind::Div, e, parse_factor());
            } else {
                return e;
            }
        }
    }

    Expr parse_factor() {
        if (eat('-')) return make_unary(ExprKind::Neg, parse_factor());
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_atom();
        if (eat('^')) return make_pow(base, parse_uint("unsigned integer exponent"));
        return base;
    }

    Expr parse_atom() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of expression");
        char c = text[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (c == '(') {
            ++pos;
            Expr e = parse_expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_name();
        fail("unexpected character");
    }

    Expr parse_number() {
        size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos < text.size() && text[pos] == '.') {
            ++pos;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        }
        if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
            size_t mark = pos++;
            if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
            if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
                while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
            } else {
                pos = mark;  // 'e' starts an identifier, not an exponent
            }
        }
        double v = 0.0;
        auto res = std::from_chars(text.data() + start, text.data() + pos, v);
        if (res.ec != std::errc() || res.ptr != text.data() + pos) {
            pos = start;
            fail("invalid number literal");
        }
        return make_const(v);
    }

    Expr parse_name() {
        size_t start = pos;
        while (pos < text.size() && std::isalpha(static_cast<unsigned char>(text[pos]))) ++pos;
        std::string name = text.substr(start, pos - start);
        if (name == "x") {
            skip_ws();
            if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos]))) {
                pos = start;
                fail("expected variable index after 'x'");
            }
            int k = parse_uint("variable index");
            if (k < 1 || k > n) {
                pos = start;
                fail("variable x" + std::to_string(k) + " out of range 1.." + std::to_string(n));
            }
            return make_var(k);
        }
        ExprKind kind;
        if (name == "sin") {
            kind = ExprKind::Sin;
        } else if (name == "cos") {
            kind = ExprKind::Cos;
        } else if (name == "exp") {
            kind = ExprKind::Exp;
        } else {
            pos = start;
            fail("unknown identifier '" + name + "'");
        }
        if (!eat('(')) fail("expected '(' after function name");
        Expr arg = parse_expr();
        if (!eat(')')) fail("expected ')'");
        return make_unary(kind, arg);
    }
};

}  // namespace

Expr parse_expression(const std::string& text, int n) {
    Parser p{text, n};
    Expr e = p.parse_expr();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing characters");
    return e;
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

namespace {

// Slot levels mirror the grammar nonterminals; a node may be printed without
// parentheses wherever its own level is at least the slot's.
enum Prec { kExprSlot = 0, kTermSlot = 1, kFactorSlot = 2, kPowSlot = 3, kAtomSlot = 4 };

int node_level(const Expr& e) {
    switch (e->kind) {
        case ExprKind::Add:
        case ExprKind::Sub:
            return kExprSlot;
        case ExprKind::Mul:
        case ExprKind::Div:
            return kTermSlot;
        case ExprKind::Neg:
            return kFactorSlot;
        case ExprKind::Pow:
            return kPowSlot;
        default:
            return kAtomSlot;
    }
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void print_rec(const Expr& e, int slot, std::string& out) {
    // A negative literal would re-lex as unary minus, so it may not stand
    // where an atom is required (the base of '^').
    bool needs_parens = node_level(e) < slot ||
                        (slot == kAtomSlot && e->kind == ExprKind::Const && e->value < 0);
    if (needs_parens) {
        out += '(';
        print_rec(e, kExprSlot, out);
        out += ')';
        return;
    }
    switch (e->kind) {
        case ExprKind::Const:
            out += format_double(e->value);
            break;
        case ExprKind::Var:
            out += 'x';
            out += std::to_string(e->index);
            break;
        case ExprKind::Neg:
            out += '-';
            print_rec(e->a, kFactorSlot, out);
            break;
        case ExprKind::Add:
            print_rec(e->a, kExprSlot, out);
            out += '+';
            print_rec(e->b, kTermSlot, out);
            break;
        case ExprKind::Sub:
            print_rec(e->a, kExprSlot, out);
            out += '-';
            print_rec(e->b, kTermSlot, out);
            break;
        case ExprKind::Mul:
            print_rec(e->a, kTermSlot, out);
            out += '*';
            print_rec(e->b, kFactorSlot, out);
            break;
        case ExprKind::Div:
            print_rec(e->a, kTermSlot, out);
            out += '/';
            print_rec(e->b, kFactorSlot, out);
            break;
        case ExprKind::Pow:
            print_rec(e->a, kAtomSlot, out);
            out += '^';
            out += std::to_string(e->index);
            break;
        case ExprKind::Sin:
        case ExprKind::Cos:
        case ExprKind::Exp:
            out += e->kind == ExprKind::Sin ? "sin" : e->kind == ExprKind::Cos ? "cos" : "exp";
            out += '(';
            print_rec(e->a, kExprSlot, out);
            out += ')';
            break;
    }
}

}  // namespace

std::string to_string(const Expr& e) {
    std::string out;
    print_rec(e, kExprSlot, out);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double evaluate(const Expr& e, const std::vector<double>& x) {
    switch (e->kind) {
        case ExprKind::Const:
            return e->value;
        case ExprKind::Var:
            if (e->index < 1 || e->index > static_cast<int>(x.size()))
                throw ExprError("variable x" + std::to_string(e->index) + " out of range");
            return x[e->index - 1];
        case ExprKind::Neg:
            return -evaluate(e->a, x);
        case ExprKind::Add:
            return evaluate(e->a, x) + evaluate(e->b, x);
        case ExprKind::Sub:
            return evaluate(e->a, x) - evaluate(e->b, x);
        case ExprKind::Mul:
            return evaluate(e->a, x) * evaluate(e->b, x);
        case ExprKind::Div: {
            double den = evaluate(e->b, x);
            if (den == 0.0) throw ExprError("division by zero");
            return evaluate(e->a, x) / den;
        }
        case ExprKind::Pow:
            return pow_int(evaluate(e->a, x), e->index);
        case ExprKind::Sin:
            return std::sin(evaluate(e->a, x));
        case ExprKind::Cos:
            return std::cos(evaluate(e->a, x));
        case ExprKind::Exp:
            return std::exp(evaluate(e->a, x));
    }
    throw ExprError("corrupt expression node");
}

Interval interval_evaluate(const Expr& e, const std::vector<Interval>& box) {
    switch (e->kind) {
        case ExprKind::Const:
            return Interval(e->value);
        case ExprKind::Var:
            if (e->index < 1 || e->index > static_cast<int>(box.size()))
                throw ExprError("variable x" + std::to_string(e->index) + " out of range");
            return box[e->index - 1];
        case ExprKind::Neg:
            return -interval_evaluate(e->a, box);
        case ExprKind::Add:
            return interval_evaluate(e->a, box) + interval_evaluate(e->b, box);
        case ExprKind::Sub:
            return interval_evaluate(e->a, box) - interval_evaluate(e->b, box);
        case ExprKind::Mul:
            return interval_evaluate(e->a, box) * interval_evaluate(e->b, box);
        case ExprKind::Div:
            return interval_evaluate(e->a, box) / interval_evaluate(e->b, box);
        case ExprKind::Pow:
            return pow_int(interval_evaluate(e->a, box), e->index);
        case ExprKind::Sin:
            return sin(interval_evaluate(e->a, box));
        case ExprKind::Cos:
            return cos(interval_evaluate(e->a, box));
        case ExprKind::Exp:
            return exp(interval_evaluate(e->a, box));
    }
    throw ExprError("corrupt expression node");
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

namespace {

bool is_const(const Expr& e, double v) { return e->kind == ExprKind::Const && e->value == v; }

Expr s_neg(const Expr& a) {
    if (a->kind == ExprKind::Const) return make_const(-a->value);
    if (a->kind == ExprKind::Neg) return a->a;
    return make_unary(ExprKind::Neg, a);
}

Expr s_add(const Expr& a, const Expr& b) {
    if (a->kind == ExprKind::Const && b->kind == ExprKind::Const)
        return make_const(a->value + b->value);
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    return make_binary(ExprKind::Add, a, b);
}

Expr s_sub(const Expr& a, const Expr& b) {
    if (a->kind == ExprKind::Const && b->kind == ExprKind::Const)
        return make_const(a->value - b->value);
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return s_neg(b);
    return make_binary(ExprKind::Sub, a, b);
}

Expr s_mul(const Expr& a, const Expr& b) {
    if (a->kind == ExprKind::Const && b->kind == ExprKind::Const)
        return make_const(a->value * b->value);
    if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    return make_binary(ExprKind::Mul, a, b);
}

Expr s_div(const Expr& a, const Expr& b) {
    if (a->kind == ExprKind::Const && b->kind == ExprKind::Const && b->value != 0.0)
        return make_const(a->value / b->value);
    if (is_const(b, 1.0)) return a;
    return make_binary(ExprKind::Div, a, b);
}

Expr s_pow(const Expr& a, int p) {
    if (p == 0) return make_const(1.0);
    if (p == 1) return a;
    if (a->kind == ExprKind::Const) return make_const(pow_int(a->value, p));
    return make_pow(a, p);
}

}  // namespace

Expr differentiate(const Expr& e, int k) {
    switch (e->kind) {
        case ExprKind::Const:
            return make_const(0.0);
        case ExprKind::Var:
            return make_const(e->index == k ? 1.0 : 0.0);
        case ExprKind::Neg:
            return s_neg(differentiate(e->a, k));
        case ExprKind::Add:
            return s_add(differentiate(e->a, k), differentiate(e->b, k));
        case ExprKind::Sub:
            return s_sub(differentiate(e->a, k), differentiate(e->b, k));
        case ExprKind::Mul:
            return s_add(s_mul(differentiate(e->a, k), e->b), s_mul(e->a, differentiate(e->b, k)));
        case ExprKind::Div:
            // (a/b)' = (a'b - ab') / b^2
            return s_div(s_sub(s_mul(differentiate(e->a, k), e->b),
                               s_mul(e->a, differentiate(e->b, k))),
                         s_pow(e->b, 2));
        case ExprKind::Pow:
            if (e->index == 0) return make_const(0.0);
            return s_mul(s_mul(make_const(static_cast<double>(e->index)), s_pow(e->a, e->index - 1)),
                         differentiate(e->a, k));
        case ExprKind::Sin:
            return s_mul(make_unary(ExprKind::Cos, e->a), differentiate(e->a, k));
        case ExprKind::Cos:
            return s_neg(s_mul(make_unary(ExprKind::Sin, e->a), differentiate(e->a, k)));
        case ExprKind::Exp:
            return s_mul(make_unary(ExprKind::Exp, e->a), differentiate(e->a, k));
    }
    throw ExprError("corrupt expression node");
}

// ---------------------------------------------------------------------------
// Structure helpers
// ---------------------------------------------------------------------------

bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.get() == b.get()) return true;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case ExprKind::Const:
            return a->value == b->value;
        case ExprKind::Var:
            return a->index == b->index;
        case ExprKind::Pow:
            return a->index == b->index && structurally_equal(a->a, b->a);
        case ExprKind::Neg:
        case ExprKind::Sin:
        case ExprKind::Cos:
        case ExprKind::Exp:
            return structurally_equal(a->a, b->a);
        default:
            return structurally_equal(a->a, b->a) && structurally_equal(a->b, b->b);
    }
}

namespace {

void collect_vars(const Expr& e, std::set<int>& out) {
    if (e->kind == ExprKind::Var) {
        out.insert(e->index);
        return;
    }
    if (e->a) collect_vars(e->a, out);
    if (e->b) collect_vars(e->b, out);
}

}  // namespace

std::vector<int> variables_of(const Expr& e) {
    std::set<int> vars;
    collect_vars(e, vars);
    return std::vector<int>(vars.begin(), vars.end());
}

// ---------------------------------------------------------------------------
// SystemModel
// ---------------------------------------------------------------------------

std::vector<double> evaluate_field(const SystemModel& m, const std::vector<double>& x) {
    std::vector<double> out(m.components.size());
    for (size_t i = 0; i < m.components.size(); ++i) out[i] = evaluate(m.components[i], x);
    return out;
}

void validate_model(const SystemModel& m) {
    if (m.n < 1) throw ExprError("system dimension must be at least 1");
    if (static_cast<int>(m.components.size()) != m.n)
        throw ExprError("system has " + std::to_string(m.components.size()) + " components, expected " +
                        std::to_string(m.n));
    if (static_cast<int>(m.domain.size()) != m.n)
        throw ExprError("domain has " + std::to_string(m.domain.size()) + " intervals, expected " +
                        std::to_string(m.n));
    for (int k = 0; k < m.n; ++k) {
        if (!(m.domain[k].lo < 0.0 && 0.0 < m.domain[k].hi))
            throw ExprError("origin is not interior to the domain in coordinate " + std::to_string(k + 1));
    }
    std::vector<double> zero(m.n, 0.0);
    std::vector<double> f0 = evaluate_field(m, zero);
    for (int q = 0; q < m.n; ++q) {
        if (!std::isfinite(f0[q]) || std::abs(f0[q]) > 1e-9)
            throw ExprError("f(0) component " + std::to_string(q + 1) + " is " + std::to_string(f0[q]) +
                            ", expected 0 (equilibrium at the origin)");
    }
}

// ---------------------------------------------------------------------------
// Univariate decomposition
// ---------------------------------------------------------------------------

namespace {

// Splits e into additive terms, pushing signs inward.
void flatten_sum(const Expr& e, bool negate, std::vector<std::pair<Expr, bool>>& terms) {
    switch (e->kind) {
        case ExprKind::Add:
            flatten_sum(e->a, negate, terms);
            flatten_sum(e->b, negate, terms);
            return;
        case ExprKind::Sub:
            flatten_sum(e->a, negate, terms);
            flatten_sum(e->b, !negate, terms);
            return;
        case ExprKind::Neg:
            flatten_sum(e->a, !negate, terms);
            return;
        default:
            terms.emplace_back(e, negate);
    }
}

// Splits a term into multiplicative factors; division contributes the
// reciprocal of its denominator as a factor.
void flatten_product(const Expr& e, std::vector<Expr>& factors) {
    switch (e->kind) {
        case ExprKind::Mul:
            flatten_product(e->a, factors);
            flatten_product(e->b, factors);
            return;
        case ExprKind::Div:
            flatten_product(e->a, factors);
            factors.push_back(make_binary(ExprKind::Div, make_const(1.0), e->b));
            return;
        case ExprKind::Neg:
            factors.push_back(make_const(-1.0));
            flatten_product(e->a, factors);
            return;
        default:
            factors.push_back(e);
    }
}

// A factor is affine in its single variable when its second derivative folds
// to the constant zero.
bool is_affine_factor(const Expr& g, int k) {
    Expr d2 = differentiate(differentiate(g, k), k);
    return is_const(d2, 0.0);
}

}  // namespace

std::vector<UnivariateComponent> decompose_univariate(const SystemModel& m) {
    std::vector<UnivariateComponent> out;
    for (int q = 0; q < m.n; ++q) {
        std::vector<std::pair<Expr, bool>> terms;
        flatten_sum(m.components[q], false, terms);
        for (const auto& [term, neg] : terms) {
            (void)neg;
            std::vector<Expr> factors;
            flatten_product(term, factors);
            for (const Expr& g : factors) {
                std::vector<int> vars = variables_of(g);
                if (vars.empty()) continue;  // constant factor
                if (vars.size() > 1)
                    throw ExprError("component f" + std::to_string(q + 1) + " contains multivariate factor '" +
                                    to_string(g) + "'; unsupported for the decomposition");
                int k = vars[0];
                if (is_affine_factor(g, k)) continue;
                bool seen = false;
                for (const auto& uc : out) {
                    if (uc.variable == k && uc.component == q + 1 && structurally_equal(uc.g, g)) {
                        seen = true;
                        break;
                    }
                }
                if (!seen) out.push_back({k, g, q + 1});
            }
        }
    }
    return out;
}

}  // namespace cpa
