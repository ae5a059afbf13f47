#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cpa/lp.hpp"

using cpa::kInf;
using cpa::LinearProgram;
using cpa::LpStatus;

TEST_CASE("lower bound alone pins the optimum") {
    LinearProgram lp;
    lp.add_variable("x", 3.0, kInf, 1.0);
    auto sol = cpa::solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("same optimum when the bound is written as a row") {
    LinearProgram lp;
    int x = lp.add_variable("x", -kInf, kInf, 1.0);
    lp.add_row({{x, -1.0}}, -3.0);  // -x <= -3
    auto sol = cpa::solve_lp_simplex(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("conflicting row and bound is infeasible") {
    LinearProgram lp;
    int x = lp.add_variable("x", 0.0, kInf);
    lp.add_row({{x, 1.0}}, -1.0);  // x <= -1 against x >= 0
    CHECK(cpa::solve_lp(lp).status == LpStatus::Infeasible);
}

TEST_CASE("crossed bounds are infeasible") {
    LinearProgram lp;
    lp.add_variable("x", 1.0, 0.0);
    CHECK(cpa::solve_lp_simplex(lp).status == LpStatus::Infeasible);
    CHECK(cpa::solve_lp_ipm(lp).status == LpStatus::Infeasible);
}

TEST_CASE("descent along an unconstrained ray is unbounded") {
    LinearProgram lp;
    int x = lp.add_variable("x", 0.0, kInf, -1.0);
    lp.add_row({{x, -1.0}}, -1.0);  // x >= 1, objective -x
    CHECK(cpa::solve_lp_simplex(lp).status == LpStatus::Unbounded);

    LinearProgram free;
    free.add_variable("x", -kInf, kInf, 1.0);
    CHECK(cpa::solve_lp_simplex(free).status == LpStatus::Unbounded);
}

TEST_CASE("upper bounds participate in the optimum") {
    // max x + 2y over x + y <= 3, x,y in [0,2]: y saturates first.
    LinearProgram lp;
    int x = lp.add_variable("x", 0.0, 2.0, -1.0);
    int y = lp.add_variable("y", 0.0, 2.0, -2.0);
    lp.add_row({{x, 1.0}, {y, 1.0}}, 3.0);
    auto sol = cpa::solve_lp_simplex(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.x[x] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sol.x[y] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(sol.objective == doctest::Approx(-5.0).epsilon(1e-9));
}

TEST_CASE("degenerate vertex still reaches the optimum") {
    LinearProgram lp;
    int x = lp.add_variable("x", 0.0, kInf, -1.0);
    int y = lp.add_variable("y", 0.0, kInf, -1.0);
    lp.add_row({{x, 1.0}}, 1.0);
    lp.add_row({{y, 1.0}}, 1.0);
    lp.add_row({{x, 1.0}, {y, 1.0}}, 2.0);  // redundant at the optimum
    auto sol = cpa::solve_lp_simplex(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(-2.0).epsilon(1e-9));
}

TEST_CASE("fixed variables are substituted consistently by both solvers") {
    auto build = [] {
        LinearProgram lp;
        int x = lp.add_variable("x", 5.0, 5.0);
        int y = lp.add_variable("y", -100.0, kInf, 1.0);
        lp.add_row({{x, 1.0}, {y, -1.0}}, 0.0);  // y >= x
        return lp;
    };
    auto a = cpa::solve_lp_simplex(build());
    auto b = cpa::solve_lp_ipm(build());
    REQUIRE(a.status == LpStatus::Optimal);
    REQUIRE(b.status == LpStatus::Optimal);
    CHECK(a.objective == doctest::Approx(5.0).epsilon(1e-8));
    CHECK(b.objective == doctest::Approx(5.0).epsilon(1e-7));
    CHECK(b.x[0] == 5.0);
}

namespace {

// Feasible-by-construction instance in the shape the certificate LPs have:
// finite lower bounds, no uppers, positive costs (hence bounded).
LinearProgram random_instance(std::mt19937& rng, int n, int m) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    LinearProgram lp;
    std::vector<double> x0(n);
    for (int j = 0; j < n; ++j) {
        double lo = -2.0 + 2.0 * u01(rng);
        lp.add_variable("v" + std::to_string(j), lo, kInf, 0.1 + 2.0 * u01(rng));
        x0[j] = lo + u01(rng);
    }
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int i = 0; i < m; ++i) {
        int nnz = 3 + static_cast<int>(u01(rng) * 3.0);
        std::vector<std::pair<int, double>> coeffs;
        double lhs = 0.0;
        for (int k = 0; k < nnz; ++k) {
            int j = pick(rng);
            double v = -2.0 + 4.0 * u01(rng);
            coeffs.push_back({j, v});
            lhs += v * x0[j];
        }
        lp.add_row(std::move(coeffs), lhs + 0.1 + u01(rng));
    }
    return lp;
}

}  // namespace

TEST_CASE("simplex and interior-point agree on random instances") {
    std::mt19937 rng(20240817);
    for (int trial = 0; trial < 30; ++trial) {
        LinearProgram lp = random_instance(rng, 8 + trial % 5, 10 + trial % 7);
        auto a = cpa::solve_lp_simplex(lp);
        auto b = cpa::solve_lp_ipm(lp);
        REQUIRE(a.status == LpStatus::Optimal);
        REQUIRE(b.status == LpStatus::Optimal);
        CHECK(std::abs(a.objective - b.objective) <=
              1e-6 * (1.0 + std::abs(a.objective)));
        CHECK(cpa::max_row_violation(lp, a.x) <= 1e-7);
        CHECK(cpa::max_row_violation(lp, b.x) <= 1e-7);
    }
}

TEST_CASE("solver output is deterministic") {
    std::mt19937 rng(7);
    LinearProgram lp = random_instance(rng, 12, 15);
    auto a = cpa::solve_lp_simplex(lp);
    auto b = cpa::solve_lp_simplex(lp);
    REQUIRE(a.status == LpStatus::Optimal);
    CHECK(a.x == b.x);
    auto c = cpa::solve_lp_ipm(lp);
    auto d = cpa::solve_lp_ipm(lp);
    REQUIRE(c.status == LpStatus::Optimal);
    CHECK(c.x == d.x);
}

TEST_CASE("dispatcher sends large instances through the interior-point path") {
    std::mt19937 rng(11);
    LinearProgram lp = random_instance(rng, 260, 650);
    auto via_dispatch = cpa::solve_lp(lp);
    auto reference = cpa::solve_lp_simplex(lp);
    REQUIRE(via_dispatch.status == LpStatus::Optimal);
    REQUIRE(reference.status == LpStatus::Optimal);
    CHECK(std::abs(via_dispatch.objective - reference.objective) <=
          1e-6 * (1.0 + std::abs(reference.objective)));
}

TEST_CASE("mps export lists rows, columns and non-default bounds") {
    LinearProgram lp;
    int x = lp.add_variable("x", 1.0, kInf, 2.0);
    int y = lp.add_variable("y", -kInf, 4.0);
    lp.add_row({{x, 1.0}, {y, -3.0}}, 7.0);
    cpa::write_mps(lp, "lp_writer_check.mps");

    std::ifstream in("lp_writer_check.mps");
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    for (const char* needle :
         {"ROWS", " N COST", " L R0", " x COST 2", " y R0 -3", " RHS R0 7",
          " LO BND x 1", " MI BND y", " UP BND y 4", "ENDATA"})
        CHECK_MESSAGE(text.find(needle) != std::string::npos, needle);
}

namespace {

const char* kOracleScript = R"PY(
import json, sys
from scipy.optimize import linprog

spec = json.load(open(sys.argv[1]))
n = len(spec["c"])
A, b = [], []
for row in spec["rows"]:
    a = [0.0] * n
    for j, v in row["coeffs"]:
        a[j] += v
    A.append(a)
    b.append(row["rhs"])
bounds = list(zip(spec["lo"], spec["up"]))
res = linprog(spec["c"], A_ub=A or None, b_ub=b or None, bounds=bounds,
              method="highs")
json.dump({"status": int(res.status),
           "objective": None if res.status != 0 else float(res.fun)},
          open(sys.argv[2], "w"))
)PY";

bool scipy_available() {
    return std::system("python3 -c 'import scipy.optimize' >/dev/null 2>&1") == 0;
}

}  // namespace

TEST_CASE("cross-check against scipy linprog when available") {
    if (!scipy_available()) {
        MESSAGE("scipy not available; skipping external cross-check");
        return;
    }
    {
        std::ofstream out("lp_oracle.py");
        out << kOracleScript;
    }
    std::mt19937 rng(20240818);
    for (int trial = 0; trial < 10; ++trial) {
        LinearProgram lp = random_instance(rng, 6 + trial, 8 + trial);
        if (trial % 3 == 2) {
            // Wedge in a contradiction so infeasibility is exercised too.
            lp.add_row({{0, 1.0}}, lp.lower[0] - 1.0);
        }
        cpa::write_lp_json(lp, "lp_case.json");
        REQUIRE(std::system("python3 lp_oracle.py lp_case.json lp_result.json") == 0);
        std::ifstream in("lp_result.json");
        REQUIRE(in.good());
        nlohmann::json result = nlohmann::json::parse(in);

        auto mine = cpa::solve_lp_simplex(lp);
        int status = result["status"].get<int>();
        if (status == 0) {
            REQUIRE(mine.status == LpStatus::Optimal);
            double ref = result["objective"].get<double>();
            CHECK(std::abs(mine.objective - ref) <= 1e-6 * (1.0 + std::abs(ref)));
        } else if (status == 2) {
            CHECK(mine.status == LpStatus::Infeasible);
        }
    }
}
