#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "cpa/lp.hpp"

namespace cpa {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

constexpr double kConvTol = 1e-9;  // relative residual / gap target
constexpr int kMaxIter = 200;

// The interior-point path works on the shifted program
//   min c'u  s.t.  A u + w = bhat,  u >= 0,  w >= 0
// where u = x - lower. Dual slacks: z (for u) and zeta = -y (for w).
struct IpmProblem {
    int n = 0, m = 0;
    SpMat A, At;
    Vec b, c;
};

struct IpmState {
    Vec x, w, y, z;  // zeta = -y is kept implicit
};

// Max alpha in [0, 1] with v + alpha*dv >= 0 componentwise.
double step_length(const Vec& v, const Vec& dv) {
    double a = 1.0;
    for (int i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
    return a;
}

struct NewtonStep {
    Vec dx, dw, dy, dz;
};

// One Newton solve for given complementarity targets, reusing the LDLT
// factorization of M = A' Dw^-1 A + Dx.
NewtonStep newton(const IpmProblem& p, const IpmState& s,
                  const Eigen::SimplicialLDLT<SpMat>& ldlt, const Vec& dw_diag,
                  const Vec& rp, const Vec& rd, const Vec& tx, const Vec& tw) {
    Vec zeta = -s.y;
    Vec r1 = rp - tw.cwiseQuotient(zeta);
    Vec r2 = rd - tx.cwiseQuotient(s.x);
    Vec rhs = p.At * r1.cwiseQuotient(dw_diag) - r2;
    NewtonStep d;
    d.dx = ldlt.solve(rhs);
    d.dy = (r1 - p.A * d.dx).cwiseQuotient(dw_diag);
    d.dw = (tw + s.w.cwiseProduct(d.dy)).cwiseQuotient(zeta);
    d.dz = (tx - s.z.cwiseProduct(d.dx)).cwiseQuotient(s.x);
    return d;
}

}  // namespace

LpSolution solve_lp_ipm(const LinearProgram& lp) {
    const int n0 = lp.num_vars();
    LpSolution sol;

    // Presolve: substitute fixed variables, require the remaining shape
    // (finite lower bound, no upper bound) the path-following form needs.
    std::vector<int> keep(n0, -1);
    std::vector<double> fixed(n0, 0.0);
    int n = 0;
    for (int j = 0; j < n0; ++j) {
        if (lp.lower[j] > lp.upper[j]) {
            sol.status = LpStatus::Infeasible;
            return sol;
        }
        if (lp.lower[j] == lp.upper[j]) {
            if (!std::isfinite(lp.lower[j])) throw LpError("variable fixed at infinity");
            fixed[j] = lp.lower[j];
        } else if (lp.lower[j] == -kInf || lp.upper[j] != kInf) {
            throw LpError("interior-point solver requires lower-bounded, upper-free variables");
        } else {
            keep[j] = n++;
        }
    }

    IpmProblem p;
    p.n = n;
    p.c = Vec::Zero(n);
    double obj_const = 0.0;
    for (int j = 0; j < n0; ++j) {
        if (keep[j] >= 0) p.c(keep[j]) = lp.objective[j];
        else obj_const += lp.objective[j] * fixed[j];
    }

    std::vector<Eigen::Triplet<double>> trips;
    std::vector<double> bhat;
    for (const auto& row : lp.rows) {
        double rhs = row.rhs;
        bool empty = true;
        for (auto [j, v] : row.coeffs) {
            if (keep[j] >= 0) {
                rhs -= v * lp.lower[j];  // shift u = x - lower
                empty = false;
            } else {
                rhs -= v * fixed[j];
            }
        }
        if (empty) {
            if (rhs < -1e-9) {
                sol.status = LpStatus::Infeasible;
                return sol;
            }
            continue;
        }
        int i = static_cast<int>(bhat.size());
        for (auto [j, v] : row.coeffs)
            if (keep[j] >= 0 && v != 0.0) trips.push_back({i, keep[j], v});
        bhat.push_back(rhs);
    }
    p.m = static_cast<int>(bhat.size());
    p.b = Vec::Map(bhat.data(), p.m);

    auto emit = [&](const Vec& u, LpStatus status, int iters) {
        sol.status = status;
        sol.iterations = iters;
        if (status != LpStatus::Optimal) return sol;
        sol.x.assign(n0, 0.0);
        for (int j = 0; j < n0; ++j)
            sol.x[j] = keep[j] >= 0 ? u(keep[j]) + lp.lower[j] : fixed[j];
        if (max_row_violation(lp, sol.x) > 1e-7) {
            sol.status = LpStatus::NumericalFailure;
            return sol;
        }
        sol.objective = obj_const;
        for (int j = 0; j < n0; ++j) sol.objective += lp.objective[j] * sol.x[j];
        return sol;
    };

    if (n == 0) return emit(Vec(), LpStatus::Optimal, 0);
    if (p.m == 0) {
        // Separable: each shifted variable runs to 0 or escapes to infinity.
        for (int j = 0; j < n; ++j)
            if (p.c(j) < 0.0) return emit(Vec(), LpStatus::Unbounded, 0);
        return emit(Vec::Zero(n), LpStatus::Optimal, 0);
    }

    p.A.resize(p.m, n);
    p.A.setFromTriplets(trips.begin(), trips.end());
    p.A.makeCompressed();
    p.At = p.A.transpose();
    p.At.makeCompressed();

    // Scale-aware cold start, interior by construction.
    double bs = std::sqrt(std::max(1.0, p.b.lpNorm<Eigen::Infinity>()));
    double cs = std::sqrt(std::max(1.0, p.c.lpNorm<Eigen::Infinity>()));
    IpmState s;
    s.x = Vec::Constant(n, bs);
    s.w = Vec::Constant(p.m, bs);
    s.y = Vec::Constant(p.m, -cs);
    s.z = Vec::Constant(n, cs);

    Eigen::SimplicialLDLT<SpMat> ldlt;
    bool analyzed = false;
    double mu0 = 0.0;

    for (int iter = 1; iter <= kMaxIter; ++iter) {
        Vec zeta = -s.y;
        Vec rp = p.b - p.A * s.x - s.w;
        Vec rd = p.c - p.At * s.y - s.z;
        double gap = s.x.dot(s.z) + s.w.dot(zeta);
        double mu = gap / (n + p.m);
        if (iter == 1) mu0 = mu;

        double obj = p.c.dot(s.x);
        double rel_p = rp.lpNorm<Eigen::Infinity>() / (1.0 + p.b.lpNorm<Eigen::Infinity>());
        double rel_d = rd.lpNorm<Eigen::Infinity>() / (1.0 + p.c.lpNorm<Eigen::Infinity>());
        double rel_g = gap / (1.0 + std::abs(obj));
        if (rel_p <= kConvTol && rel_d <= kConvTol && rel_g <= kConvTol)
            return emit(s.x, LpStatus::Optimal, iter - 1);
        if (!std::isfinite(mu) || mu > 1e10 * (1.0 + mu0))
            return emit(s.x, LpStatus::NumericalFailure, iter - 1);

        // Normal-equations matrix for this iterate, with a touch of static
        // regularization; the sparsity pattern never changes, so the symbolic
        // analysis is done once.
        Vec dw_diag = s.w.cwiseQuotient(zeta);
        Vec dx_diag = s.z.cwiseQuotient(s.x);
        SpMat WA = p.A;
        for (int k = 0; k < WA.outerSize(); ++k)
            for (SpMat::InnerIterator it(WA, k); it; ++it)
                it.valueRef() /= dw_diag(it.row());
        double reg = 1e-12;
        SpMat M;
        for (int attempt = 0;; ++attempt) {
            M = SpMat(p.At * WA);
            Vec diag_add = dx_diag.array() + reg;
            SpMat D(n, n);
            D.reserve(Eigen::VectorXi::Constant(n, 1));
            for (int j = 0; j < n; ++j) D.insert(j, j) = diag_add(j);
            D.makeCompressed();
            M = M + D;
            if (!analyzed) {
                ldlt.analyzePattern(M);
                analyzed = true;
            }
            ldlt.factorize(M);
            if (ldlt.info() == Eigen::Success) break;
            if (attempt >= 4) return emit(s.x, LpStatus::NumericalFailure, iter - 1);
            reg *= 100.0;
        }

        // Predictor (affine scaling) step.
        Vec tx_aff = -s.x.cwiseProduct(s.z);
        Vec tw_aff = -s.w.cwiseProduct(zeta);
        NewtonStep aff = newton(p, s, ldlt, dw_diag, rp, rd, tx_aff, tw_aff);
        Vec dzeta_aff = -aff.dy;

        double ap = std::min(step_length(s.x, aff.dx), step_length(s.w, aff.dw));
        double ad = std::min(step_length(s.z, aff.dz), step_length(zeta, dzeta_aff));
        double gap_aff = (s.x + ap * aff.dx).dot(s.z + ad * aff.dz) +
                         (s.w + ap * aff.dw).dot(zeta + ad * dzeta_aff);
        double sigma = std::pow(std::max(gap_aff, 0.0) / gap, 3);
        sigma = std::clamp(sigma, 1e-8, 1.0 - 1e-8);

        // Corrector step reuses the factorization.
        Vec tx = Vec::Constant(n, sigma * mu) - s.x.cwiseProduct(s.z) -
                 aff.dx.cwiseProduct(aff.dz);
        Vec tw = Vec::Constant(p.m, sigma * mu) - s.w.cwiseProduct(zeta) -
                 aff.dw.cwiseProduct(dzeta_aff);
        NewtonStep d = newton(p, s, ldlt, dw_diag, rp, rd, tx, tw);
        Vec dzeta = -d.dy;

        double eta = 0.99995;
        ap = std::min(1.0, eta * std::min(step_length(s.x, d.dx), step_length(s.w, d.dw)));
        ad = std::min(1.0, eta * std::min(step_length(s.z, d.dz), step_length(zeta, dzeta)));
        if (ap < 1e-12 && ad < 1e-12)
            return emit(s.x, LpStatus::NumericalFailure, iter - 1);

        s.x += ap * d.dx;
        s.w += ap * d.dw;
        s.y += ad * d.dy;
        s.z += ad * d.dz;
    }
    return emit(s.x, LpStatus::NumericalFailure, kMaxIter);
}

LpSolution solve_lp(const LinearProgram& lp) {
    bool ipm_shape = true;
    for (int j = 0; j < lp.num_vars() && ipm_shape; ++j) {
        if (lp.lower[j] == -kInf) ipm_shape = false;
        if (lp.upper[j] != kInf && lp.upper[j] != lp.lower[j]) ipm_shape = false;
    }
    if (!ipm_shape || lp.num_rows() <= 600) {
        LpSolution sol = solve_lp_simplex(lp);
        // The backends have complementary failure modes: massive degeneracy
        // wears the simplex down, unbounded/infeasible verdicts elude the
        // interior point. Retry small eligible instances on the other one.
        if (sol.status == LpStatus::NumericalFailure && ipm_shape)
            return solve_lp_ipm(lp);
        return sol;
    }
    LpSolution sol = solve_lp_ipm(lp);
    if (sol.status == LpStatus::NumericalFailure && lp.num_rows() <= 20000)
        return solve_lp_simplex(lp);
    return sol;
}

}  // namespace cpa
