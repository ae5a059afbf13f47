#include "cpa/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "cpa/interval.hpp"  // pow_int

namespace cpa {

namespace {

bool is_origin(const std::vector<double>& v) {
    for (double c : v)
        if (c != 0.0) return false;
    return true;
}

struct IntVecHash {
    size_t operator()(const std::vector<int>& v) const {
        size_t h = 1469598103934665603ull;
        for (int x : v) {
            h ^= static_cast<size_t>(x) + 0x9e3779b97f4a7c15ull;
            h *= 1099511628211ull;
        }
        return h;
    }
};

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

}  // namespace

void rebuild_topology(Triangulation& t) {
    const int n = t.n;
    const int m = t.simplex_count();

    int origin_id = -1;
    for (int v = 0; v < t.vertex_count(); ++v) {
        if (is_origin(t.vertices[v])) {
            origin_id = v;
            break;
        }
    }

    t.origin_flag.assign(m, 0);
    for (int i = 0; i < m; ++i) {
        auto& s = t.simplices[i];
        if (static_cast<int>(s.size()) != n + 1) throw MeshError("simplex arity mismatch");
        for (int j = 0; j <= n; ++j) {
            if (s[j] == origin_id && origin_id >= 0) {
                std::swap(s[0], s[j]);
                t.origin_flag[i] = 1;
                break;
            }
        }
    }

    t.adjacency.assign(m, std::vector<int>(n + 1, -1));
    std::unordered_map<std::vector<int>, std::pair<int, int>, IntVecHash> open_facets;
    open_facets.reserve(static_cast<size_t>(m) * (n + 1));
    std::vector<int> facet(n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j <= n; ++j) {
            int p = 0;
            for (int k = 0; k <= n; ++k)
                if (k != j) facet[p++] = t.simplices[i][k];
            std::sort(facet.begin(), facet.end());
            auto it = open_facets.find(facet);
            if (it == open_facets.end()) {
                open_facets.emplace(facet, std::make_pair(i, j));
            } else {
                auto [i2, j2] = it->second;
                if (i2 < 0) throw MeshError("facet shared by more than two simplices");
                t.adjacency[i][j] = i2;
                t.adjacency[i2][j2] = i;
                it->second = {-1, -1};
            }
        }
    }
}

Triangulation build_rectilinear_mesh(const std::vector<std::vector<double>>& axes) {
    const int n = static_cast<int>(axes.size());
    if (n < 1) throw MeshError("empty axis list");
    std::vector<int> counts(n);
    for (int k = 0; k < n; ++k) {
        if (axes[k].size() < 2) throw MeshError("axis " + std::to_string(k + 1) + " has fewer than 2 coordinates");
        for (size_t i = 1; i < axes[k].size(); ++i)
            if (!(axes[k][i - 1] < axes[k][i]))
                throw MeshError("axis " + std::to_string(k + 1) + " coordinates not strictly increasing");
        counts[k] = static_cast<int>(axes[k].size());
    }

    Triangulation t;
    t.n = n;

    // Vertices in row-major order, the last axis varying fastest.
    auto vertex_id = [&](const std::vector<int>& idx) {
        long long id = 0;
        for (int k = 0; k < n; ++k) id = id * counts[k] + idx[k];
        return static_cast<int>(id);
    };
    long long total = 1;
    for (int k = 0; k < n; ++k) total *= counts[k];
    t.vertices.reserve(total);
    std::vector<int> idx(n, 0);
    for (long long v = 0; v < total; ++v) {
        std::vector<double> coords(n);
        for (int k = 0; k < n; ++k) coords[k] = axes[k][idx[k]];
        t.vertices.push_back(std::move(coords));
        for (int k = n - 1; k >= 0; --k) {
            if (++idx[k] < counts[k]) break;
            idx[k] = 0;
        }
    }

    // One simplex per (cell, axis order): walk from the cell corner nearest
    // the origin, stepping one axis at a time away from it. Within an
    // orthant every cell shares the same step directions, and two cells
    // adjacent across a plane agree on all other axes' directions, so the
    // triangulations of shared faces coincide. Around the origin itself the
    // outward walks form a fan with the origin as a vertex of every incident
    // simplex — the arrangement the origin-centred expansion factors assume,
    // and the one that keeps steep gradient requirements on one axis from
    // colliding with positivity along a neighbouring axis inside a single
    // affine piece.
    std::vector<std::vector<int>> orders;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        orders.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::vector<int> cell(n, 0);
    bool cells_done = false;
    while (!cells_done) {
        std::vector<int> sgn(n), near(n);
        for (int k = 0; k < n; ++k) {
            const double mid = 0.5 * (axes[k][cell[k]] + axes[k][cell[k] + 1]);
            sgn[k] = mid >= 0.0 ? 1 : -1;
            near[k] = sgn[k] > 0 ? cell[k] : cell[k] + 1;
        }
        for (const auto& order : orders) {
            std::vector<int> corner = near;
            std::vector<int> simplex;
            simplex.reserve(n + 1);
            simplex.push_back(vertex_id(corner));
            for (int step = 0; step < n; ++step) {
                corner[order[step]] += sgn[order[step]];
                simplex.push_back(vertex_id(corner));
            }
            t.simplices.push_back(std::move(simplex));
        }
        cells_done = true;
        for (int k = n - 1; k >= 0; --k) {
            if (++cell[k] < counts[k] - 1) {
                cells_done = false;
                break;
            }
            cell[k] = 0;
        }
    }

    rebuild_topology(t);
    return t;
}

Triangulation build_grid_mesh(const std::vector<std::pair<double, double>>& domain,
                              const std::vector<double>& spacing) {
    const int n = static_cast<int>(domain.size());
    if (n < 1) throw MeshError("empty domain");
    if (spacing.size() != domain.size()) throw MeshError("spacing arity mismatch");

    std::vector<std::vector<double>> axes(n);
    for (int k = 0; k < n; ++k) {
        const auto [lo, hi] = domain[k];
        const double s = spacing[k];
        if (!(s > 0.0)) throw MeshError("spacing must be positive");
        if (!(lo < hi)) throw MeshError("empty axis range");
        const double len = hi - lo;
        const long long cells = std::llround(len / s);
        if (cells < 1 || std::abs(cells * s - len) > 1e-9 * std::max(1.0, std::abs(len)))
            throw MeshError("spacing " + std::to_string(s) + " does not divide axis " + std::to_string(k + 1));
        const long long zero_idx = std::llround(-lo / s);
        if (zero_idx < 0 || zero_idx > cells || std::abs(lo + zero_idx * s) > 1e-9)
            throw MeshError("origin is not a lattice point on axis " + std::to_string(k + 1));
        axes[k].resize(cells + 1);
        for (long long i = 0; i <= cells; ++i) axes[k][i] = lo + i * s;
        axes[k][zero_idx] = 0.0;
    }
    return build_rectilinear_mesh(axes);
}

SimplexGeometry simplex_geometry(const Triangulation& t, int i) {
    const int n = t.n;
    const auto& s = t.simplices.at(i);
    SimplexGeometry g;

    g.X.resize(n, n);
    for (int j = 1; j <= n; ++j)
        for (int k = 0; k < n; ++k) g.X(j - 1, k) = t.vertices[s[j]][k] - t.vertices[s[0]][k];

    double max_edge = 0.0;
    for (int a = 0; a <= n; ++a)
        for (int b = a + 1; b <= n; ++b) max_edge = std::max(max_edge, dist(t.vertices[s[a]], t.vertices[s[b]]));

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(g.X);
    const double det = lu.determinant();
    if (std::abs(det) <= 1e-12 * pow_int(max_edge, n))
        throw MeshError("degenerate simplex " + std::to_string(i));
    g.Xinv = lu.inverse();

    g.c.assign(n + 1, 0.0);
    if (t.origin_flag.size() == t.simplices.size() && t.origin_flag[i]) {
        // Vertex 0 is the origin: c_0 = 0 and
        // c_j = n * |x_j| * (max_k |x_k| + |x_j|) over k = 1..n.
        double far0 = 0.0;
        for (int k = 1; k <= n; ++k) far0 = std::max(far0, dist(t.vertices[s[0]], t.vertices[s[k]]));
        for (int j = 1; j <= n; ++j) {
            const double dj = dist(t.vertices[s[j]], t.vertices[s[0]]);
            g.c[j] = n * dj * (far0 + dj);
        }
    } else {
        // c_j = n * max_k |x_j - x_k|^2.
        for (int j = 0; j <= n; ++j) {
            double worst = 0.0;
            for (int k = 0; k <= n; ++k) {
                const double d = dist(t.vertices[s[j]], t.vertices[s[k]]);
                worst = std::max(worst, d * d);
            }
            g.c[j] = n * worst;
        }
    }

    // Longest edge by length, ties broken by the smaller (min,max) global
    // vertex pair so refinement is deterministic.
    bool first = true;
    for (int a = 0; a <= n; ++a) {
        for (int b = a + 1; b <= n; ++b) {
            const double len = dist(t.vertices[s[a]], t.vertices[s[b]]);
            const std::pair<int, int> key{std::min(s[a], s[b]), std::max(s[a], s[b])};
            const std::pair<int, int> best_key{std::min(s[g.edge_a], s[g.edge_b]),
                                               std::max(s[g.edge_a], s[g.edge_b])};
            bool better = first || len > g.edge_length + 1e-12 ||
                          (len > g.edge_length - 1e-12 && key < best_key);
            if (better) {
                g.edge_a = a;
                g.edge_b = b;
                g.edge_length = len;
                first = false;
            }
        }
    }
    return g;
}

Eigen::VectorXd cpa_gradient(const Triangulation& t, int i, const std::vector<double>& W) {
    const int n = t.n;
    const auto& s = t.simplices.at(i);
    Eigen::MatrixXd X(n, n);
    Eigen::VectorXd wbar(n);
    for (int j = 1; j <= n; ++j) {
        for (int k = 0; k < n; ++k) X(j - 1, k) = t.vertices[s[j]][k] - t.vertices[s[0]][k];
        wbar(j - 1) = W.at(s[j]) - W.at(s[0]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(X);
    if (lu.determinant() == 0.0) throw MeshError("singular simplex " + std::to_string(i));
    return lu.solve(wbar);
}

double simplex_volume(const Triangulation& t, int i) {
    const int n = t.n;
    const auto& s = t.simplices.at(i);
    Eigen::MatrixXd X(n, n);
    for (int j = 1; j <= n; ++j)
        for (int k = 0; k < n; ++k) X(j - 1, k) = t.vertices[s[j]][k] - t.vertices[s[0]][k];
    double fact = 1.0;
    for (int k = 2; k <= n; ++k) fact *= k;
    return std::abs(X.determinant()) / fact;
}

double total_volume(const Triangulation& t) {
    double v = 0.0;
    for (int i = 0; i < t.simplex_count(); ++i) v += simplex_volume(t, i);
    return v;
}

// ---------------------------------------------------------------------------
// Longest-edge bisection
// ---------------------------------------------------------------------------

namespace {

struct EdgeKey {
    int a = -1;  // global ids, a < b
    int b = -1;
    double len = 0.0;
};

struct Refiner {
    Triangulation& t;
    std::vector<std::vector<int>> incident;  // vertex -> simplices (may hold stale entries)
    long long splits = 0;

    explicit Refiner(Triangulation& tri) : t(tri) {
        incident.resize(t.vertices.size());
        for (int i = 0; i < t.simplex_count(); ++i)
            for (int v : t.simplices[i]) incident[v].push_back(i);
    }

    EdgeKey make_edge(int va, int vb) const {
        EdgeKey e;
        e.a = std::min(va, vb);
        e.b = std::max(va, vb);
        e.len = dist(t.vertices[e.a], t.vertices[e.b]);
        return e;
    }

    // Strict preference order used to select "the" longest edge.
    static bool beats(const EdgeKey& x, const EdgeKey& y) {
        if (x.len > y.len + 1e-12) return true;
        if (y.len > x.len + 1e-12) return false;
        return std::pair(x.a, x.b) < std::pair(y.a, y.b);
    }

    EdgeKey longest_edge(int s) const {
        const auto& vs = t.simplices[s];
        EdgeKey best = make_edge(vs[0], vs[1]);
        for (size_t a = 0; a < vs.size(); ++a) {
            for (size_t b = a + 1; b < vs.size(); ++b) {
                EdgeKey e = make_edge(vs[a], vs[b]);
                if (beats(e, best)) best = e;
            }
        }
        return best;
    }

    bool contains_edge(int s, const EdgeKey& e) const {
        bool ha = false, hb = false;
        for (int v : t.simplices[s]) {
            ha |= v == e.a;
            hb |= v == e.b;
        }
        return ha && hb;
    }

    std::vector<int> sharers(const EdgeKey& e) const {
        std::vector<int> out;
        for (int s : incident[e.a])
            if (contains_edge(s, e)) out.push_back(s);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    // Bisects edge e everywhere. Any sharer whose own longest edge is longer
    // is first bisected along that edge (the Rivara propagation); recursion
    // ascends strictly in the edge order, so it terminates.
    void bisect(const EdgeKey& e, int depth) {
        if (depth > 100000 || ++splits > 50000000)
            throw MeshError("edge bisection propagation failed to terminate");
        for (;;) {
            std::vector<int> share = sharers(e);
            if (share.empty()) return;  // bisected by a deeper call
            bool recursed = false;
            for (int s : share) {
                EdgeKey le = longest_edge(s);
                if (le.a != e.a || le.b != e.b) {
                    bisect(le, depth + 1);
                    recursed = true;
                    break;
                }
            }
            if (!recursed) {
                split_all(share, e);
                return;
            }
        }
    }

    void split_all(const std::vector<int>& share, const EdgeKey& e) {
        const int n = t.n;
        const int mid = t.vertex_count();
        std::vector<double> mv(n);
        for (int k = 0; k < n; ++k) {
            mv[k] = 0.5 * (t.vertices[e.a][k] + t.vertices[e.b][k]);
            if (std::abs(mv[k]) < 1e-12) mv[k] = 0.0;
        }
        t.vertices.push_back(std::move(mv));
        incident.emplace_back();

        for (int s : share) {
            std::vector<int> child_b = t.simplices[s];  // keeps e.b, e.a -> mid
            for (int& v : t.simplices[s])
                if (v == e.b) v = mid;  // slot s keeps e.a
            for (int& v : child_b)
                if (v == e.a) v = mid;
            const int q = t.simplex_count();
            t.simplices.push_back(std::move(child_b));
            incident[mid].push_back(s);
            incident[mid].push_back(q);
            for (int v : t.simplices[q]) incident[v].push_back(q);
        }
    }
};

}  // namespace

void refine_leb(Triangulation& t, int i) {
    if (i < 0 || i >= t.simplex_count()) throw MeshError("simplex index out of range");
    Refiner r(t);
    r.bisect(r.longest_edge(i), 0);
    rebuild_topology(t);
}

// ---------------------------------------------------------------------------
// Point location
// ---------------------------------------------------------------------------

namespace {

// Barycentric coordinates of x in simplex i, ordered by local vertex.
std::vector<double> barycentric(const Triangulation& t, int i, const std::vector<double>& x) {
    const int n = t.n;
    const auto& s = t.simplices[i];
    Eigen::MatrixXd XT(n, n);
    Eigen::VectorXd rhs(n);
    for (int j = 1; j <= n; ++j)
        for (int k = 0; k < n; ++k) XT(k, j - 1) = t.vertices[s[j]][k] - t.vertices[s[0]][k];
    for (int k = 0; k < n; ++k) rhs(k) = x[k] - t.vertices[s[0]][k];
    Eigen::VectorXd lam = XT.partialPivLu().solve(rhs);
    std::vector<double> out(n + 1);
    double sum = 0.0;
    for (int j = 1; j <= n; ++j) {
        out[j] = lam(j - 1);
        sum += lam(j - 1);
    }
    out[0] = 1.0 - sum;
    return out;
}

bool inside_bbox(const Triangulation& t, int i, const std::vector<double>& x, double tol) {
    for (int k = 0; k < t.n; ++k) {
        double lo = 1e300, hi = -1e300;
        for (int v : t.simplices[i]) {
            lo = std::min(lo, t.vertices[v][k]);
            hi = std::max(hi, t.vertices[v][k]);
        }
        if (x[k] < lo - tol || x[k] > hi + tol) return false;
    }
    return true;
}

std::pair<int, std::vector<double>> locate_scan(const Triangulation& t, const std::vector<double>& x) {
    constexpr double kTol = 1e-9;
    for (int i = 0; i < t.simplex_count(); ++i) {
        if (!inside_bbox(t, i, x, kTol)) continue;
        std::vector<double> lam = barycentric(t, i, x);
        bool ok = true;
        for (double l : lam) ok &= l >= -kTol;
        if (ok) return {i, std::move(lam)};
    }
    throw MeshError("point outside the triangulation");
}

}  // namespace

std::pair<int, std::vector<double>> locate(const Triangulation& t, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != t.n) throw MeshError("point dimension mismatch");
    constexpr double kTol = 1e-9;
    if (t.simplex_count() < 10000 || t.adjacency.size() != t.simplices.size())
        return locate_scan(t, x);

    int cur = 0;
    for (int step = 0; step < t.simplex_count(); ++step) {
        std::vector<double> lam = barycentric(t, cur, x);
        int worst = 0;
        for (int j = 1; j <= t.n; ++j)
            if (lam[j] < lam[worst]) worst = j;
        if (lam[worst] >= -kTol) return {cur, std::move(lam)};
        int next = t.adjacency[cur][worst];
        if (next < 0) break;  // walked onto the boundary; fall back
        cur = next;
    }
    return locate_scan(t, x);
}

}  // namespace cpa
