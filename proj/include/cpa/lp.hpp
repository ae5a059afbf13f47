#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpa {

struct LpError : std::runtime_error {
    explicit LpError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// Sparse linear program: minimize c'x subject to a'x <= rhs rows and
// per-variable bounds (+-inf allowed).
struct LinearProgram {
    struct Row {
        std::vector<std::pair<int, double>> coeffs;  // (variable, coefficient)
        double rhs = 0.0;
    };

    std::vector<double> objective;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::string> names;
    std::vector<Row> rows;

    int num_vars() const { return static_cast<int>(objective.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }

    int add_variable(const std::string& name, double lo, double hi, double cost = 0.0) {
        objective.push_back(cost);
        lower.push_back(lo);
        upper.push_back(hi);
        names.push_back(name);
        return num_vars() - 1;
    }

    void add_row(std::vector<std::pair<int, double>> coeffs, double rhs) {
        rows.push_back({std::move(coeffs), rhs});
    }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

std::string to_string(LpStatus s);

struct LpSolution {
    LpStatus status = LpStatus::NumericalFailure;
    std::vector<double> x;
    double objective = 0.0;
    int iterations = 0;
};

// Bounded-variable revised simplex (two-phase, Bland fallback). The reference
// solver: deterministic and exact-pivoting, intended for small instances.
LpSolution solve_lp_simplex(const LinearProgram& lp);

// Mehrotra predictor-corrector interior-point solver on sparse normal
// equations. Handles large instances; requires every variable to have a
// finite lower bound and no finite upper bound (fixed variables are
// eliminated up front). Our Lyapunov LPs always have this shape.
LpSolution solve_lp_ipm(const LinearProgram& lp);

// Dispatch by size: small programs go to the simplex solver, large ones to
// the interior-point solver (falling back to simplex on numerical failure
// when the instance is small enough for it).
LpSolution solve_lp(const LinearProgram& lp);

// Checks a'x <= rhs + tol on every row and the variable bounds; returns the
// worst violation (<= 0 when feasible).
double max_row_violation(const LinearProgram& lp, const std::vector<double>& x);

// Free-format MPS export, for cross-checking with external solvers.
void write_mps(const LinearProgram& lp, const std::string& path);

// Plain JSON dump {"c", "rows", "lo", "up"} with nulls for infinities; used
// by the test-suite oracle scripts.
void write_lp_json(const LinearProgram& lp, const std::string& path);

}  // namespace cpa
