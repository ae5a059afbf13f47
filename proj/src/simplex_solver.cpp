#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cpa/lp.hpp"

namespace cpa {

namespace {

constexpr double kDualTol = 1e-9;    // reduced-cost threshold for entering
constexpr double kRateFloor = 1e-9;   // rates below this are noise, never block
constexpr double kHarris = 1e-8;      // bound overshoot allowed in the ratio test
constexpr double kPivotFloor = 1e-7;  // smallest entry worth pivoting on
constexpr double kExpandGrow = 2.5e-12;  // per-pivot bound expansion (anti-cycling)
constexpr double kZeroTol = 1e-7;     // phase-1 "artificials are gone" level
constexpr double kPert = 1e-6;        // cost-perturbation scale (anti-degeneracy)
constexpr int kRefactorEvery = 50;    // basis refactorization cadence
constexpr int kStallLimit = 256;      // degenerate steps before Bland's rule

enum class VarState : char { Basic, AtLower, AtUpper, FreeZero };

// Deterministic pseudo-random weights in (0, 1) for cost perturbation.
double jitter_unit(int k) {
    uint64_t h = static_cast<uint64_t>(k) + 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Revised simplex over columns [originals | slacks | artificials]. Slacks
// turn every row into an equality; artificials are added only for rows whose
// slack would start negative, so phase 1 begins from a signed identity basis.
struct Simplex {
    const LinearProgram& lp;
    int n, m, nt;  // originals, rows, total columns (n + 2m)

    std::vector<std::vector<std::pair<int, double>>> cols;
    std::vector<double> lo, up, cost;
    std::vector<double> rhs;
    std::vector<double> x;
    std::vector<VarState> state;
    std::vector<int> basic;  // variable occupying each row

    // The basis is held in product form: a sparse LU of the basis matrix as
    // of the last refactorization, plus one eta per pivot since. An eta
    // records the pivot row and the transformed entering column w = B⁻¹a_q,
    // which is everything needed to apply (or transpose-apply) the rank-one
    // basis change. Solves stay O(factor + pivots·m) instead of the O(m²)
    // per pivot (and O(m³) per rebuild) that maintaining an explicit dense
    // inverse costs.
    struct Eta {
        int row;
        Eigen::VectorXd w;
        double piv;
    };
    // mutable: SparseLU::adjoint() is non-const in Eigen 3.4 even though
    // solving through it leaves the factorization untouched.
    mutable Eigen::SparseLU<Eigen::SparseMatrix<double>> blu;
    std::vector<Eta> etas;

    int pivots = 0;
    bool bland = false;
    int stalled = 0;
    double tau = 0.0;           // accumulated bound expansion, reset on refactor
    bool want_refactor = false; // set after a risky pivot to rebuild early

    explicit Simplex(const LinearProgram& prog)
        : lp(prog),
          n(prog.num_vars()),
          m(prog.num_rows()),
          nt(n + 2 * m),
          cols(nt),
          lo(nt),
          up(nt),
          cost(nt, 0.0),
          rhs(m),
          x(nt, 0.0),
          state(nt, VarState::AtLower),
          basic(m, -1) {
        for (int i = 0; i < m; ++i) {
            rhs[i] = lp.rows[i].rhs;
            for (auto [j, v] : lp.rows[i].coeffs)
                if (v != 0.0) cols[j].push_back({i, v});
        }
        // Merge duplicate row entries so a column is single-valued per row;
        // dense scatters of it would otherwise drop all but the last entry.
        for (auto& col : cols) {
            std::sort(col.begin(), col.end());
            size_t out = 0;
            for (size_t k = 0; k < col.size(); ++k) {
                if (out > 0 && col[out - 1].first == col[k].first)
                    col[out - 1].second += col[k].second;
                else
                    col[out++] = col[k];
            }
            col.resize(out);
        }
        for (int i = 0; i < m; ++i) cols[n + i] = {{i, 1.0}};  // slack
        for (int j = 0; j < n; ++j) {
            lo[j] = lp.lower[j];
            up[j] = lp.upper[j];
            if (lo[j] != -kInf) {
                state[j] = VarState::AtLower;
                x[j] = lo[j];
            } else if (up[j] != kInf) {
                state[j] = VarState::AtUpper;
                x[j] = up[j];
            } else {
                state[j] = VarState::FreeZero;
                x[j] = 0.0;
            }
        }
        for (int i = 0; i < m; ++i) {
            lo[n + i] = 0.0;
            up[n + i] = kInf;
        }
        // Row residuals at the initial nonbasic point decide which rows get a
        // slack basis entry and which need a signed artificial.
        for (int i = 0; i < m; ++i) {
            double r = rhs[i];
            for (auto [j, v] : lp.rows[i].coeffs) r -= v * x[j];
            int art = n + m + i;
            if (r >= 0.0) {
                basic[i] = n + i;
                x[n + i] = r;
                state[n + i] = VarState::Basic;
                lo[art] = up[art] = 0.0;  // unused artificial stays fixed
            } else {
                double sign = -1.0;
                cols[art] = {{i, sign}};
                lo[art] = 0.0;
                up[art] = kInf;
                // Unequal positive weights keep phase 1 out of degenerate
                // ties; the feasibility verdict (sum reaches zero) is the
                // same for any positive weighting.
                cost[art] = 1.0 + 0.5 * jitter_unit(i);
                basic[i] = art;
                x[art] = -r;
                state[art] = VarState::Basic;
            }
        }
        refactor();  // signed identity: cannot fail
    }

    double objective() const {
        double z = 0.0;
        for (int j = 0; j < nt; ++j) z += cost[j] * x[j];
        return z;
    }

    Eigen::VectorXd column(int j) const {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
        for (auto [i, v] : cols[j]) a(i) = v;
        return a;
    }

    // Solves B y = v where B is the factored matrix updated by the recorded
    // pivots, i.e. B = B₀E₁…E_k with E_t the identity except column row_t,
    // which holds w_t. Factor solve first, then peel the etas in creation
    // order: with y the solution so far, E y' = y gives y' = y except
    // y'(row) = y(row)/piv, then subtracting that multiple of w off-row.
    Eigen::VectorXd ftran(const Eigen::VectorXd& v) const {
        Eigen::VectorXd y = blu.solve(v);
        for (const Eta& e : etas) {
            const double t = y(e.row) / e.piv;
            if (t != 0.0) {
                y -= t * e.w;
                y(e.row) = t;
            }
        }
        return y;
    }

    // Solves Bᵀ u = v: transposed etas in reverse order, then the factor.
    // Eᵀ u' = u leaves every component except u'(row), which absorbs the
    // whole inner product of w with u'.
    Eigen::VectorXd btran(Eigen::VectorXd v) const {
        for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
            const double off = it->w.dot(v) - it->piv * v(it->row);
            v(it->row) = (v(it->row) - off) / it->piv;
        }
        return blu.adjoint().solve(v);
    }

    void push_eta(int row, Eigen::VectorXd w) {
        const double piv = w(row);
        etas.push_back({row, std::move(w), piv});
    }

    // Degenerate pivoting on a drifted eta file can assemble a basis whose
    // columns are linearly dependent in exact arithmetic. Recover by keeping
    // a maximal independent subset, parking the ejected variables on their
    // nearest bound, and covering the uncovered rows with their unit slack
    // (or phase-1 artificial) columns, which completes a nonsingular basis.
    bool repair_basis(const Eigen::MatrixXd& B) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
        qr.setThreshold(1e-10);
        const int rank = static_cast<int>(qr.rank());
        if (rank >= m || rank == 0) return false;

        const auto& colp = qr.colsPermutation().indices();
        std::vector<char> keep(m, 0);
        for (int k = 0; k < rank; ++k) keep[colp(k)] = 1;

        Eigen::MatrixXd kept(m, rank);
        for (int r = 0, c = 0; r < m; ++r)
            if (keep[r]) kept.col(c++) = B.col(r);

        // Independent row set of the kept columns; the complement rows are
        // exactly the ones a unit column must cover.
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrt(kept.transpose());
        qrt.setThreshold(1e-10);
        if (static_cast<int>(qrt.rank()) < rank) return false;
        const auto& rowp = qrt.colsPermutation().indices();
        std::vector<char> covered(m, 0);
        for (int k = 0; k < rank; ++k) covered[rowp(k)] = 1;

        std::vector<int> slots;
        for (int r = 0; r < m; ++r) {
            if (keep[r]) continue;
            int b = basic[r];
            if (lo[b] == -kInf && up[b] == kInf) {
                state[b] = VarState::FreeZero;
                x[b] = 0.0;
            } else if (up[b] == kInf ||
                       (lo[b] != -kInf && x[b] - lo[b] <= up[b] - x[b])) {
                state[b] = VarState::AtLower;
                x[b] = lo[b];
            } else {
                state[b] = VarState::AtUpper;
                x[b] = up[b];
            }
            slots.push_back(r);
        }
        size_t s = 0;
        for (int i = 0; i < m && s < slots.size(); ++i) {
            if (covered[i]) continue;
            int cand = state[n + i] != VarState::Basic           ? n + i
                     : !cols[n + m + i].empty() &&
                       state[n + m + i] != VarState::Basic       ? n + m + i
                                                                 : -1;
            if (cand < 0) return false;
            basic[slots[s++]] = cand;
            state[cand] = VarState::Basic;
        }
        return s == slots.size();
    }

    // Refactorizes the basis from scratch, drops the eta file, and
    // recomputes basic values from the nonbasic point, clearing accumulated
    // update error (which is also what retires the bound expansion:
    // nonbasics sit exactly on their bounds again afterwards). Singularity
    // is judged by the residual of the fresh solve rather than pivot
    // magnitudes: a dependent basis cannot reproduce the right-hand side.
    bool refactor() {
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::vector<Eigen::Triplet<double>> trips;
            double bmax = 1.0;
            for (int r = 0; r < m; ++r)
                for (auto [i, v] : cols[basic[r]]) {
                    trips.emplace_back(i, r, v);
                    bmax = std::max(bmax, std::abs(v));
                }
            Eigen::SparseMatrix<double> B(m, m);
            B.setFromTriplets(trips.begin(), trips.end());
            blu.compute(B);

            bool ok = blu.info() == Eigen::Success;
            Eigen::VectorXd xb;
            if (ok) {
                Eigen::VectorXd r = Eigen::VectorXd::Map(rhs.data(), m);
                for (int j = 0; j < nt; ++j)
                    if (state[j] != VarState::Basic && x[j] != 0.0)
                        for (auto [i, v] : cols[j]) r(i) -= v * x[j];
                xb = blu.solve(r);
                const double scale =
                    bmax * (1.0 + xb.lpNorm<Eigen::Infinity>()) +
                    r.lpNorm<Eigen::Infinity>();
                ok = xb.allFinite() &&
                     (B * xb - r).lpNorm<Eigen::Infinity>() <= 1e-9 * scale;
            }
            if (!ok) {
                if (attempt > 0 || !repair_basis(Eigen::MatrixXd(B)))
                    return false;
                continue;
            }
            etas.clear();
            for (int i = 0; i < m; ++i) x[basic[i]] = xb(i);
            tau = 0.0;
            return true;
        }
        return false;
    }

    // Entering-variable choice; returns (variable, direction) or (-1, 0).
    // The eligibility threshold scales with the dual values: reduced costs
    // carry noise of that order, and entering on noise manufactures
    // phantom unbounded rays.
    std::pair<int, int> price() const {
        Eigen::VectorXd cb(m);
        for (int i = 0; i < m; ++i) cb(i) = cost[basic[i]];
        Eigen::VectorXd y = btran(std::move(cb));
        double tol = kDualTol * (1.0 + y.lpNorm<Eigen::Infinity>());

        int pick = -1, dir = 0;
        double best = tol;
        for (int j = 0; j < nt; ++j) {
            if (state[j] == VarState::Basic) continue;
            if (up[j] - lo[j] <= 0.0) continue;  // fixed (includes idle artificials)
            double d = cost[j];
            for (auto [i, v] : cols[j]) d -= y(i) * v;
            int cand_dir = 0;
            if (state[j] == VarState::AtLower && d < -tol) cand_dir = 1;
            else if (state[j] == VarState::AtUpper && d > tol) cand_dir = -1;
            else if (state[j] == VarState::FreeZero && std::abs(d) > tol)
                cand_dir = d < 0.0 ? 1 : -1;
            if (cand_dir == 0) continue;
            if (bland) return {j, cand_dir};
            if (std::abs(d) > best) {
                best = std::abs(d);
                pick = j;
                dir = cand_dir;
            }
        }
        return {pick, dir};
    }

    enum class Step { Moved, Unbounded, Failed };

    // Ratio of row r against the moving direction, measured to the working
    // bounds (true bounds expanded by tau), or -1 when the row cannot block
    // (free bound or noise-level rate). The expansion grows a little every
    // pivot, so a degenerate vertex revisited later yields strictly larger
    // steps and exact cycling cannot reproduce itself. The blocked bound and
    // the rate come back through the out-parameters.
    double exact_ratio(int r, int dir, const Eigen::VectorXd& w, bool& to_lower,
                       double& rate_out) const {
        const double rate = dir * w(r);  // basic value moves at -rate per unit t
        const int b = basic[r];
        if (rate > kRateFloor) {
            if (lo[b] == -kInf) return -1.0;
            to_lower = true;
            rate_out = rate;
            return std::max(x[b] - lo[b] + tau, 0.0) / rate;
        }
        if (rate < -kRateFloor) {
            if (up[b] == kInf) return -1.0;
            to_lower = false;
            rate_out = -rate;
            return std::max(up[b] - x[b] + tau, 0.0) / -rate;
        }
        return -1.0;
    }

    // Harris two-pass ratio test. Pass 1 finds the largest step for which no
    // blocking row overshoots its bound by more than kHarris; pass 2 picks,
    // among rows whose exact ratio fits under that cap, the one with the
    // largest pivot magnitude (Bland mode: the smallest variable index among
    // candidates with a usable pivot entry — index order alone happily lands
    // on noise-level entries whose basis is singular in exact arithmetic).
    // The leaving variable lands exactly on its own exact ratio, and pass 1
    // guarantees every other candidate overshoots by at most kHarris, so any
    // choice from the candidate set keeps the basis near-feasible.
    Step step(int j, int dir, double& moved_by) {
        tau += kExpandGrow;
        Eigen::VectorXd w = ftran(column(j));
        bool can_flip = lo[j] != -kInf && up[j] != kInf;

        double t_max = can_flip ? up[j] - lo[j] : kInf;
        for (int r = 0; r < m; ++r) {
            bool to_lower;
            double rate;
            const double t = exact_ratio(r, dir, w, to_lower, rate);
            if (t >= 0.0) t_max = std::min(t_max, t + kHarris / rate);
        }
        if (t_max == kInf) return Step::Unbounded;

        double t_best = kInf;
        int leave = -1;
        bool leave_to_lower = false;
        double best_piv = 0.0;
        for (int r = 0; r < m; ++r) {
            bool to_lower;
            double rate;
            const double t = exact_ratio(r, dir, w, to_lower, rate);
            if (t < 0.0 || t > t_max) continue;
            const double aw = std::abs(w(r));
            bool better;
            if (leave < 0) better = true;
            else if (bland) {
                bool ok = aw >= kPivotFloor, cur = best_piv >= kPivotFloor;
                better = ok != cur ? ok : ok ? basic[r] < basic[leave] : aw > best_piv;
            } else {
                better = aw > best_piv;
            }
            if (better) {
                t_best = t;
                leave = r;
                best_piv = aw;
                leave_to_lower = to_lower;
            }
        }

        if (leave < 0) {  // nothing blocks before the flip length
            moved_by = t_max;
            for (int r = 0; r < m; ++r) x[basic[r]] -= t_max * dir * w(r);
            x[j] = dir > 0 ? up[j] : lo[j];
            state[j] = dir > 0 ? VarState::AtUpper : VarState::AtLower;
            return Step::Moved;
        }

        // Never step by exactly zero: push at least a sliver against the
        // expanded bounds (capped by the Harris limit so bystanders stay in
        // their overshoot envelope). The leaving variable snaps back onto
        // its true bound below, so the sliver never accumulates there.
        const double t_step =
            std::min(std::max(t_best, kExpandGrow / best_piv), t_max);
        moved_by = t_step;
        for (int r = 0; r < m; ++r) x[basic[r]] -= t_step * dir * w(r);

        int out = basic[leave];
        x[out] = leave_to_lower ? lo[out] : up[out];
        state[out] = leave_to_lower ? VarState::AtLower : VarState::AtUpper;
        double enter_from = state[j] == VarState::AtUpper ? up[j]
                          : state[j] == VarState::FreeZero ? 0.0
                                                           : lo[j];
        x[j] = enter_from + dir * t_step;
        state[j] = VarState::Basic;
        basic[leave] = j;

        // Record the pivot as an eta. A pivot small enough to threaten the
        // update's accuracy schedules an early rebuild from scratch.
        double piv = w(leave);
        if (std::abs(piv) < kRateFloor) return Step::Failed;
        if (std::abs(piv) < 1e-5) want_refactor = true;
        push_eta(leave, std::move(w));

        if (++pivots % kRefactorEvery == 0 || want_refactor) {
            want_refactor = false;
            if (!refactor()) return Step::Failed;
            // The feasibility invariant must survive drift between rebuilds;
            // a basic value materially outside its bounds means the numerics
            // are gone and the verdicts can no longer be trusted.
            for (int r = 0; r < m; ++r) {
                int b = basic[r];
                if (x[b] < lo[b] - 1e-7 || x[b] > up[b] + 1e-7) return Step::Failed;
            }
        }
        return Step::Moved;
    }

    // Runs pricing/ratio/pivot until optimal for the current cost vector.
    // Bland's rule latches on after a run of degenerate steps, or when the
    // objective stops making headway despite nonzero steps (numerical
    // rocking); it stays on, since alternating rules can itself cycle.
    Step optimize(int iter_cap) {
        bland = false;
        stalled = 0;
        double window_obj = objective();
        int window = 0;
        for (int it = 0; it < iter_cap; ++it) {
            auto [j, dir] = price();
            if (j < 0) return Step::Moved;  // optimal
            double moved_by = 0.0;
            Step s = step(j, dir, moved_by);
            if (s != Step::Moved) return s;
            if (moved_by > 1e-10) stalled = 0;
            else if (++stalled >= kStallLimit) bland = true;
            if (++window >= 512) {
                double z = objective();
                if (z > window_obj - 1e-12 * (1.0 + std::abs(z))) bland = true;
                window_obj = z;
                window = 0;
            }
        }
        return Step::Failed;
    }
};

}  // namespace

LpSolution solve_lp_simplex(const LinearProgram& lp) {
    const int n = lp.num_vars();
    if ((int)lp.lower.size() != n || (int)lp.upper.size() != n || (int)lp.names.size() != n)
        throw LpError("inconsistent variable arrays");
    for (const auto& row : lp.rows) {
        if (!std::isfinite(row.rhs)) throw LpError("row rhs must be finite");
        for (auto [j, v] : row.coeffs) {
            if (j < 0 || j >= n) throw LpError("row references unknown variable");
            if (!std::isfinite(v)) throw LpError("row coefficient must be finite");
        }
    }

    LpSolution sol;
    for (int j = 0; j < n; ++j)
        if (lp.lower[j] > lp.upper[j]) {
            sol.status = LpStatus::Infeasible;
            return sol;
        }

    // No rows: each variable independently runs to its cheaper bound.
    if (lp.num_rows() == 0) {
        sol.x.assign(n, 0.0);
        for (int j = 0; j < n; ++j) {
            double c = lp.objective[j];
            if (c > 0.0) {
                if (lp.lower[j] == -kInf) { sol.status = LpStatus::Unbounded; return sol; }
                sol.x[j] = lp.lower[j];
            } else if (c < 0.0) {
                if (lp.upper[j] == kInf) { sol.status = LpStatus::Unbounded; return sol; }
                sol.x[j] = lp.upper[j];
            } else {
                sol.x[j] = lp.lower[j] != -kInf ? lp.lower[j]
                         : lp.upper[j] != kInf  ? lp.upper[j]
                                                : 0.0;
            }
            sol.objective += c * sol.x[j];
        }
        sol.status = LpStatus::Optimal;
        return sol;
    }

    Simplex s(lp);
    const int cap = 2000 + 50 * (s.m + s.nt);

    // An Unbounded verdict can be an artifact of eta-file drift, so it only
    // stands if it survives a refactorization and a second pass.
    auto run = [&s, cap] {
        Simplex::Step r = s.optimize(cap);
        if (r != Simplex::Step::Unbounded) return r;
        if (!s.refactor()) return Simplex::Step::Failed;
        return s.optimize(cap);
    };

    bool has_artificials = false;
    for (int i = 0; i < s.m; ++i) has_artificials |= s.basic[i] >= n + s.m;

    if (has_artificials) {
        Simplex::Step r = run();
        sol.iterations = s.pivots;
        if (r != Simplex::Step::Moved) return sol;  // phase 1 cannot be unbounded
        if (s.objective() > kZeroTol) {
            sol.status = LpStatus::Infeasible;
            return sol;
        }
        // Drive leftover zero-level artificials out of the basis where a
        // usable pivot exists; redundant rows keep theirs, pinned at zero.
        for (int r2 = 0; r2 < s.m; ++r2) {
            if (s.basic[r2] < n + s.m) continue;
            for (int q = 0; q < n + s.m; ++q) {
                if (s.state[q] == VarState::Basic) continue;
                if (s.up[q] - s.lo[q] <= 0.0) continue;
                Eigen::VectorXd w = s.ftran(s.column(q));
                if (std::abs(w(r2)) < 1e-7) continue;
                int out = s.basic[r2];
                s.x[out] = 0.0;
                s.state[out] = VarState::AtLower;
                s.state[q] = VarState::Basic;  // degenerate pivot: value unchanged
                s.basic[r2] = q;
                s.push_eta(r2, std::move(w));
                break;
            }
        }
        for (int i = 0; i < s.m; ++i) {
            int art = n + s.m + i;
            s.up[art] = 0.0;  // artificials may never re-enter
            s.cost[art] = 0.0;
        }
        if (!s.refactor()) return sol;
    }

    // Phase 2 runs twice: first with deterministically perturbed costs to
    // break dual degeneracy, then a cleanup pass with the true costs from
    // the (usually already optimal) perturbed basis. Unboundedness is only
    // reported from the true-cost pass.
    for (int j = 0; j < n; ++j)
        s.cost[j] = lp.objective[j] +
                    kPert * (1.0 + std::abs(lp.objective[j])) * jitter_unit(j);
    Simplex::Step r = run();
    if (r == Simplex::Step::Failed) {
        sol.iterations = s.pivots;
        return sol;
    }

    for (int j = 0; j < n; ++j) s.cost[j] = lp.objective[j];
    r = run();
    sol.iterations = s.pivots;
    if (r == Simplex::Step::Unbounded) {
        sol.status = LpStatus::Unbounded;
        return sol;
    }
    if (r != Simplex::Step::Moved) return sol;

    if (!s.refactor()) return sol;
    sol.x.assign(s.x.begin(), s.x.begin() + n);
    if (max_row_violation(lp, sol.x) > 1e-7) return sol;  // numerical failure
    sol.objective = 0.0;
    for (int j = 0; j < n; ++j) sol.objective += lp.objective[j] * sol.x[j];
    sol.status = LpStatus::Optimal;
    return sol;
}

}  // namespace cpa
