#include "cpa/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

namespace cpa {

namespace {

constexpr double kMinEdge = 1e-6;  // refuse bisections that would go below this
constexpr int kScanCells = 512;    // root-scan resolution per axis
constexpr double kRootTol = 1e-9;  // bisection width and the "numerically zero" level
constexpr int kMaxRoots = 64;      // more inflections than this means a degenerate g''

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
        .count();
}

// All roots of e (a function of x_var alone) in [lo, hi]: sign changes over a
// kScanCells grid refined by bisection, plus grid points where |e| dips below
// kRootTol at a local minimum — the signature of a root of even multiplicity,
// which produces no sign change.
std::vector<double> univariate_roots(const Expr& e, int var, int n, double lo, double hi) {
    std::vector<double> x(n, 0.0);
    const auto eval = [&](double v) {
        x[var - 1] = v;
        return evaluate(e, x);
    };

    std::vector<double> xs(kScanCells + 1), vals(kScanCells + 1);
    for (int i = 0; i <= kScanCells; ++i) {
        xs[i] = lo + (hi - lo) * i / kScanCells;
        vals[i] = eval(xs[i]);
    }

    std::vector<double> roots;
    for (int i = 0; i < kScanCells; ++i) {
        if (vals[i] * vals[i + 1] < 0.0) {
            double a = xs[i], b = xs[i + 1], fa = vals[i];
            while (b - a > kRootTol) {
                const double mid = 0.5 * (a + b);
                const double fm = eval(mid);
                if (fm == 0.0) {
                    a = b = mid;
                } else if ((fa < 0.0) == (fm < 0.0)) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
    }
    for (int i = 1; i < kScanCells; ++i) {
        const double av = std::abs(vals[i]);
        if (av < kRootTol && av <= std::abs(vals[i - 1]) && av <= std::abs(vals[i + 1]))
            roots.push_back(xs[i]);
    }

    std::sort(roots.begin(), roots.end());
    // Roots closer than a scan cell are indistinguishable at this resolution.
    const double eps = (hi - lo) / kScanCells * 0.5;
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [eps](double a, double b) { return b - a < eps; }),
                roots.end());
    if (static_cast<int>(roots.size()) > kMaxRoots)
        throw SynthError("second derivative of a univariate factor in x" + std::to_string(var) +
                         " is numerically zero over the axis (" + std::to_string(roots.size()) +
                         " roots found)");
    return roots;
}

std::vector<std::pair<double, double>> domain_pairs(const SystemModel& m) {
    std::vector<std::pair<double, double>> dom;
    dom.reserve(m.domain.size());
    for (const Interval& iv : m.domain) dom.emplace_back(iv.lo, iv.hi);
    return dom;
}

}  // namespace

std::string to_string(MeshMethod method) {
    switch (method) {
        case MeshMethod::Grid: return "grid";
        case MeshMethod::Method1: return "m1";
        case MeshMethod::Method2: return "m2";
        case MeshMethod::Method3: return "m3";
    }
    throw SynthError("unknown method");
}

MeshMethod parse_method(const std::string& text) {
    if (text == "grid") return MeshMethod::Grid;
    if (text == "m1" || text == "method1") return MeshMethod::Method1;
    if (text == "m2" || text == "method2") return MeshMethod::Method2;
    if (text == "m3" || text == "method3") return MeshMethod::Method3;
    throw SynthError("unknown method \"" + text + "\" (expected grid, m1, m2 or m3)");
}

std::string to_string(SynthVerdict v) {
    switch (v) {
        case SynthVerdict::Viable: return "viable";
        case SynthVerdict::BudgetExhausted: return "budget exhausted";
        case SynthVerdict::SolverFailure: return "solver failure";
    }
    throw SynthError("unknown verdict");
}

void validate_config(const SynthesisConfig& cfg) {
    if (cfg.max_iterations < 1) throw SynthError("max_iterations must be at least 1");
    if (!(cfg.prune_radius > 0.0)) throw SynthError("prune_radius must be positive");
    if (cfg.points_per_segment < 2) throw SynthError("points_per_segment must be at least 2");
    if (!(cfg.alpha > 0.0)) throw SynthError("alpha must be positive");
}

SynthesisReport adapt(const SystemModel& m, Triangulation t, const SynthesisConfig& cfg) {
    validate_config(cfg);
    SynthesisReport rep;
    rep.initial_simplices = t.simplex_count();

    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const auto start = std::chrono::steady_clock::now();
        const BetaTable beta = compute_beta(m, t);
        const CertificateResult r = solve_slack_certificate(m, t, beta, cfg.alpha);

        IterationRecord rec;
        rec.iteration = it;
        rec.vertex_count = t.vertex_count();
        rec.simplex_count = t.simplex_count();
        rec.max_slack =
            r.status == LpStatus::Optimal ? r.max_slack : std::numeric_limits<double>::quiet_NaN();

        if (r.status != LpStatus::Optimal) {
            rec.wall_ms = elapsed_ms(start);
            rep.iterations.push_back(rec);
            rep.verdict = SynthVerdict::SolverFailure;
            break;
        }
        rep.candidate = r.candidate;

        if (r.viable) {
            // Never report viable on the solver's word alone: the candidate
            // must survive the from-scratch recheck.
            const VerifyReport check = verify_certificate(m, t, r.candidate);
            rec.wall_ms = elapsed_ms(start);
            rep.iterations.push_back(rec);
            rep.verdict = check.viable ? SynthVerdict::Viable : SynthVerdict::SolverFailure;
            break;
        }
        if (it == cfg.max_iterations) {
            rec.wall_ms = elapsed_ms(start);
            rep.iterations.push_back(rec);
            rep.verdict = SynthVerdict::BudgetExhausted;
            break;
        }

        // Score each simplex by the total slack over its vertices (a vertex
        // shared by several simplices counts toward each); strict comparison
        // keeps the lowest index on ties.
        int worst = 0;
        double worst_score = -kInf;
        for (int i = 0; i < t.simplex_count(); ++i) {
            double score = 0.0;
            for (int v : t.simplices[i]) score += r.candidate.slacks[v];
            if (score > worst_score) {
                worst_score = score;
                worst = i;
            }
        }
        rec.worst_simplex = worst;
        rec.wall_ms = elapsed_ms(start);
        rep.iterations.push_back(rec);

        if (simplex_geometry(t, worst).edge_length * 0.5 < kMinEdge) {
            rep.verdict = SynthVerdict::BudgetExhausted;
            break;
        }
        refine_leb(t, worst);
    }

    rep.mesh = std::move(t);
    rep.delta_simplices = rep.mesh.simplex_count() - rep.initial_simplices;
    return rep;
}

std::vector<std::vector<double>> method2_vertices(const SystemModel& m,
                                                  const SynthesisConfig& cfg) {
    validate_config(cfg);
    validate_model(m);
    const std::vector<UnivariateComponent> comps = decompose_univariate(m);

    std::vector<std::vector<double>> axes(m.n);
    for (int k = 1; k <= m.n; ++k) {
        const double lo = m.domain[k - 1].lo;
        const double hi = m.domain[k - 1].hi;
        std::vector<double>& coords = axes[k - 1];

        bool nonlinear = false;
        for (const UnivariateComponent& uc : comps) {
            if (uc.variable != k) continue;
            nonlinear = true;
            // Segment the axis at the inflections of this factor and fill
            // each segment with equally spaced coordinates.
            const Expr g2 = differentiate(differentiate(uc.g, k), k);
            std::vector<double> cuts = univariate_roots(g2, k, m.n, lo, hi);
            cuts.insert(cuts.begin(), lo);
            cuts.push_back(hi);
            const double eps = (hi - lo) * 1e-9;
            for (size_t s = 0; s + 1 < cuts.size(); ++s) {
                const double a = cuts[s], b = cuts[s + 1];
                if (b - a < eps) continue;  // root at (or next to) a domain end
                for (int p = 0; p < cfg.points_per_segment; ++p)
                    coords.push_back(a + (b - a) * p / (cfg.points_per_segment - 1));
            }
        }
        if (!nonlinear) {
            const auto it = cfg.linear_axis_spacing.find(k);
            if (it == cfg.linear_axis_spacing.end())
                throw SynthError("dynamics are affine in x" + std::to_string(k) +
                                 "; set linear_axis_spacing for that axis");
            const double sp = it->second;
            if (!(sp > 0.0))
                throw SynthError("linear_axis_spacing for x" + std::to_string(k) +
                                 " must be positive");
            const double cells = std::round((hi - lo) / sp);
            if (cells < 1.0 || std::abs(cells * sp - (hi - lo)) > 1e-9)
                throw SynthError("linear_axis_spacing for x" + std::to_string(k) +
                                 " does not divide the axis");
            for (int p = 0; p <= static_cast<int>(cells); ++p)
                coords.push_back(lo + sp * p);
        }

        // Merge the contributions: drop near-duplicates and anything closer
        // to the origin than the pruning radius, then restore the origin.
        std::sort(coords.begin(), coords.end());
        const double eps = std::max(1e-12, (hi - lo) * 1e-9);
        coords.erase(std::unique(coords.begin(), coords.end(),
                                 [eps](double a, double b) { return b - a < eps; }),
                     coords.end());
        coords.erase(std::remove_if(coords.begin(), coords.end(),
                                    [&](double v) {
                                        return v != 0.0 && std::abs(v) < cfg.prune_radius;
                                    }),
                     coords.end());
        if (!std::binary_search(coords.begin(), coords.end(), 0.0)) {
            coords.push_back(0.0);
            std::sort(coords.begin(), coords.end());
        }
    }

    long long count = 1;
    for (const auto& c : axes) {
        count *= static_cast<long long>(c.size());
        if (count > 10'000'000) throw SynthError("method 2 vertex set exceeds 10^7 points");
    }
    std::vector<std::vector<double>> points;
    points.reserve(static_cast<size_t>(count));
    std::vector<size_t> idx(m.n, 0);
    for (long long p = 0; p < count; ++p) {
        std::vector<double> v(m.n);
        for (int k = 0; k < m.n; ++k) v[k] = axes[k][idx[k]];
        points.push_back(std::move(v));
        for (int k = m.n - 1; k >= 0; --k) {
            if (++idx[k] < axes[k].size()) break;
            idx[k] = 0;
        }
    }
    return points;
}

SynthesisReport run_method(const SystemModel& m, const SynthesisConfig& cfg) {
    validate_config(cfg);
    validate_model(m);

    Triangulation t;
    if (cfg.method == MeshMethod::Grid || cfg.method == MeshMethod::Method1) {
        if (static_cast<int>(cfg.grid_spacing.size()) != m.n)
            throw SynthError("grid_spacing has " + std::to_string(cfg.grid_spacing.size()) +
                             " entries for a " + std::to_string(m.n) + "-dimensional system");
        t = build_grid_mesh(domain_pairs(m), cfg.grid_spacing);
    } else {
        t = build_delaunay_mesh(method2_vertices(m, cfg));
    }

    SynthesisConfig run = cfg;
    if (cfg.method == MeshMethod::Grid || cfg.method == MeshMethod::Method2)
        run.max_iterations = 1;  // single solve, no refinement
    return adapt(m, std::move(t), run);
}

}  // namespace cpa
