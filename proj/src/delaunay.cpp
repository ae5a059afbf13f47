#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cpa/interval.hpp"  // pow_int
#include "cpa/mesh.hpp"

namespace cpa {

namespace {

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

double bbox_diag(const std::vector<std::vector<double>>& pts) {
    const size_t n = pts[0].size();
    double d2 = 0.0;
    for (size_t k = 0; k < n; ++k) {
        double lo = 1e300, hi = -1e300;
        for (const auto& p : pts) {
            lo = std::min(lo, p[k]);
            hi = std::max(hi, p[k]);
        }
        d2 += (hi - lo) * (hi - lo);
    }
    return std::sqrt(d2);
}

// |det| of the edge matrix of a cell; volume times n!.
double cell_det(const std::vector<std::vector<double>>& pts, const std::vector<int>& cell) {
    const int n = static_cast<int>(pts[0].size());
    Eigen::MatrixXd X(n, n);
    for (int j = 1; j <= n; ++j)
        for (int k = 0; k < n; ++k) X(j - 1, k) = pts[cell[j]][k] - pts[cell[0]][k];
    return std::abs(X.determinant());
}

// Deterministic pseudo-random offset in [-0.5, 0.5] for symbolic-style tie
// breaking; exact degeneracies (cospherical lattice cells, collinear runs)
// otherwise make the insertion cavities ambiguous.
double hash_unit(uint64_t key) {
    key += 0x9e3779b97f4a7c15ull;
    key = (key ^ (key >> 30)) * 0xbf58476d1ce4e5b9ull;
    key = (key ^ (key >> 27)) * 0x94d049bb133111ebull;
    key ^= key >> 31;
    return static_cast<double>(key % 1000000007ull) / 1000000007.0 - 0.5;
}

// If the points form a full tensor-product lattice, triangulate it directly
// cell by cell: every cell's corners are cospherical, so this diagonal
// assignment is one of the valid Delaunay tie-breaks, and it is exact.
bool try_lattice(const std::vector<std::vector<double>>& points, Triangulation& out) {
    const int n = static_cast<int>(points[0].size());
    std::vector<std::vector<double>> axes(n);
    std::vector<std::map<double, int>> value_index(n);
    for (int k = 0; k < n; ++k) {
        for (const auto& p : points) value_index[k].emplace(p[k], 0);
        long long prod = 1;
        for (int j = 0; j <= k; ++j) prod *= static_cast<long long>(value_index[j].size());
        if (prod > static_cast<long long>(points.size())) return false;
    }
    long long prod = 1;
    for (int k = 0; k < n; ++k) {
        if (value_index[k].size() < 2) return false;
        prod *= static_cast<long long>(value_index[k].size());
    }
    if (prod != static_cast<long long>(points.size())) return false;

    for (int k = 0; k < n; ++k) {
        int idx = 0;
        for (auto& [value, slot] : value_index[k]) {
            slot = idx++;
            axes[k].push_back(value);
        }
    }

    // Row-major lattice id for every input point; all must be distinct.
    std::vector<int> input_of_lattice(points.size(), -1);
    for (size_t i = 0; i < points.size(); ++i) {
        long long id = 0;
        for (int k = 0; k < n; ++k) id = id * static_cast<long long>(axes[k].size()) + value_index[k].at(points[i][k]);
        if (input_of_lattice[id] != -1) return false;
        input_of_lattice[id] = static_cast<int>(i);
    }

    Triangulation t = build_rectilinear_mesh(axes);
    for (auto& s : t.simplices)
        for (int& v : s) v = input_of_lattice[v];
    t.vertices = points;
    rebuild_topology(t);
    out = std::move(t);
    return true;
}

// Incremental Bowyer-Watson on jittered coordinates.
struct BowyerWatson {
    int n;
    int real_count;
    std::vector<std::vector<double>> pts;  // jittered inputs plus super vertices
    std::vector<std::vector<int>> cells;
    std::vector<char> alive;
    double diag;

    double dist2(const std::vector<double>& a, const std::vector<double>& b) const {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        return s;
    }

    bool in_sphere(const std::vector<int>& cell, const std::vector<double>& p) const {
        Eigen::MatrixXd A(n, n);
        Eigen::VectorXd rhs(n);
        const auto& x0 = pts[cell[0]];
        for (int j = 1; j <= n; ++j) {
            double r = 0.0;
            for (int k = 0; k < n; ++k) {
                A(j - 1, k) = 2.0 * (pts[cell[j]][k] - x0[k]);
                r += pts[cell[j]][k] * pts[cell[j]][k] - x0[k] * x0[k];
            }
            rhs(j - 1) = r;
        }
        Eigen::VectorXd c = A.partialPivLu().solve(rhs);
        std::vector<double> center(c.data(), c.data() + n);
        return dist2(p, center) < dist2(x0, center);
    }

    std::vector<int> facet_opposite(const std::vector<int>& cell, int j) const {
        std::vector<int> f;
        f.reserve(n);
        for (int k = 0; k <= n; ++k)
            if (k != j) f.push_back(cell[k]);
        std::sort(f.begin(), f.end());
        return f;
    }

    void insert(int p) {
        std::vector<int> bad;
        for (size_t c = 0; c < cells.size(); ++c)
            if (alive[c] && in_sphere(cells[c], pts[p])) bad.push_back(static_cast<int>(c));
        if (bad.empty()) throw MeshError("point insertion found no cavity (duplicate point?)");

        std::unordered_set<int> bad_set(bad.begin(), bad.end());
        const double grow_tol = 1e-13 * pow_int(diag, n);
        for (int guard = 0; guard < 10000; ++guard) {
            // Boundary facets of the cavity: facets used exactly once.
            std::unordered_map<std::vector<int>, int, IntVecHash> count;
            for (int c : bad)
                for (int j = 0; j <= n; ++j) ++count[facet_opposite(cells[c], j)];
            const std::vector<int>* offending = nullptr;
            std::vector<int> offender_key;
            for (const auto& [facet, uses] : count) {
                if (uses != 1) continue;
                std::vector<int> cand = facet;
                cand.push_back(p);
                if (cell_det(pts, cand) <= grow_tol) {
                    offender_key = facet;
                    offending = &offender_key;
                    break;
                }
            }
            if (!offending) break;
            // Pull the simplex on the far side of the near-coplanar facet into
            // the cavity; if the facet is on the hull, accept the sliver.
            int other = -1;
            for (size_t c = 0; c < cells.size() && other < 0; ++c) {
                if (!alive[c] || bad_set.count(static_cast<int>(c))) continue;
                for (int j = 0; j <= n; ++j) {
                    if (facet_opposite(cells[c], j) == *offending) {
                        other = static_cast<int>(c);
                        break;
                    }
                }
            }
            if (other < 0) break;
            bad.push_back(other);
            bad_set.insert(other);
        }

        std::unordered_map<std::vector<int>, int, IntVecHash> count;
        for (int c : bad)
            for (int j = 0; j <= n; ++j) ++count[facet_opposite(cells[c], j)];
        for (int c : bad) alive[c] = 0;
        for (const auto& [facet, uses] : count) {
            if (uses != 1) continue;
            std::vector<int> cell = facet;
            cell.push_back(p);
            cells.push_back(std::move(cell));
            alive.push_back(1);
        }
    }
};

}  // namespace

Triangulation build_delaunay_mesh(const std::vector<std::vector<double>>& points) {
    if (points.empty()) throw MeshError("empty point set");
    const int n = static_cast<int>(points[0].size());
    if (n != 2 && n != 3) throw MeshError("Delaunay meshing supports n = 2 or 3 only");
    for (const auto& p : points)
        if (static_cast<int>(p.size()) != n) throw MeshError("point dimension mismatch");
    if (static_cast<int>(points.size()) < n + 1) throw MeshError("need at least n+1 points");

    {
        std::unordered_map<std::vector<int>, int, IntVecHash> seen;
        for (const auto& p : points) {
            std::vector<int> key(n * 2);
            for (int k = 0; k < n; ++k) {
                uint64_t bits;
                static_assert(sizeof(double) == sizeof(uint64_t));
                std::memcpy(&bits, &p[k], sizeof(bits));
                key[2 * k] = static_cast<int>(bits >> 32);
                key[2 * k + 1] = static_cast<int>(bits & 0xffffffffull);
            }
            if (++seen[key] > 1) throw MeshError("duplicate point in Delaunay input");
        }
    }

    const double diag = bbox_diag(points);
    if (!(diag > 0.0)) throw MeshError("all points coincide");

    // Affine span check: rank of the centered coordinate matrix.
    {
        Eigen::MatrixXd M(points.size(), n);
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(n);
        for (size_t i = 0; i < points.size(); ++i)
            for (int k = 0; k < n; ++k) mean(k) += points[i][k] / points.size();
        for (size_t i = 0; i < points.size(); ++i)
            for (int k = 0; k < n; ++k) M(i, k) = points[i][k] - mean(k);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
        if (svd.singularValues()(n - 1) <= 1e-12 * diag)
            throw MeshError("points are collinear/coplanar: no full-dimensional triangulation");
    }

    Triangulation lattice;
    if (try_lattice(points, lattice)) return lattice;

    BowyerWatson bw;
    bw.n = n;
    bw.real_count = static_cast<int>(points.size());
    bw.diag = diag;
    bw.pts = points;
    for (size_t i = 0; i < points.size(); ++i)
        for (int k = 0; k < n; ++k)
            bw.pts[i][k] += 1e-9 * diag * hash_unit(static_cast<uint64_t>(i) * 16 + static_cast<uint64_t>(k));

    // Enclosing super simplex, far enough out that it never blocks a cavity.
    std::vector<double> center(n, 0.0);
    for (const auto& p : points)
        for (int k = 0; k < n; ++k) center[k] += p[k] / points.size();
    const double R = 100.0 * diag;
    std::vector<std::vector<double>> super_dirs;
    if (n == 2) {
        super_dirs = {{0.0, 1.0}, {0.866025403784, -0.5}, {-0.866025403784, -0.5}};
    } else {
        const double s = 1.0 / std::sqrt(3.0);
        super_dirs = {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
    }
    std::vector<int> super_cell;
    for (const auto& d : super_dirs) {
        std::vector<double> v(n);
        for (int k = 0; k < n; ++k) v[k] = center[k] + (3.0 + static_cast<double>(super_cell.size())) * R * d[k];
        super_cell.push_back(static_cast<int>(bw.pts.size()));
        bw.pts.push_back(std::move(v));
    }
    bw.cells.push_back(super_cell);
    bw.alive.push_back(1);

    for (int i = 0; i < bw.real_count; ++i) bw.insert(i);

    // Drop everything attached to the super simplex.
    for (size_t c = 0; c < bw.cells.size(); ++c) {
        if (!bw.alive[c]) continue;
        for (int v : bw.cells[c])
            if (v >= bw.real_count) bw.alive[c] = 0;
    }

    // Repair simplices that are degenerate in the *original* coordinates
    // (jitter can keep exactly-flat configurations alive when their lopsided
    // circumsphere is empty, which happens along the hull).
    const double flat_tol = 1e-10 * pow_int(diag, n);
    auto orig_det = [&](const std::vector<int>& cell) { return cell_det(points, cell); };
    auto find_sharer = [&](const std::vector<int>& facet, int except) {
        for (size_t c = 0; c < bw.cells.size(); ++c) {
            if (!bw.alive[c] || static_cast<int>(c) == except) continue;
            for (int j = 0; j <= n; ++j)
                if (bw.facet_opposite(bw.cells[c], j) == facet) return static_cast<int>(c);
        }
        return -1;
    };
    for (int guard = 0; guard < 4 * static_cast<int>(bw.cells.size()); ++guard) {
        int flat = -1;
        for (size_t c = 0; c < bw.cells.size(); ++c) {
            if (bw.alive[c] && orig_det(bw.cells[c]) <= flat_tol * 2.0) {  // det = n! * volume
                flat = static_cast<int>(c);
                break;
            }
        }
        if (flat < 0) break;
        if (n == 2) {
            // Flat triangle (a, c, b) with c on segment ab: flip with the
            // neighbor across its longest edge, or drop it on the hull.
            const auto& tri = bw.cells[flat];
            int la = 0, lb = 1;
            double best = -1.0;
            for (int a = 0; a < 3; ++a) {
                for (int b = a + 1; b < 3; ++b) {
                    double d = bw.dist2(points[tri[a]], points[tri[b]]);
                    if (d > best) {
                        best = d;
                        la = a;
                        lb = b;
                    }
                }
            }
            const int va = tri[la], vb = tri[lb], vc = tri[3 - la - lb];
            int other = find_sharer(bw.facet_opposite(tri, 3 - la - lb), flat);
            bw.alive[flat] = 0;
            if (other >= 0) {
                int vd = -1;
                for (int v : bw.cells[other])
                    if (v != va && v != vb) vd = v;
                bw.alive[other] = 0;
                bw.cells.push_back({va, vc, vd});
                bw.alive.push_back(1);
                bw.cells.push_back({vc, vb, vd});
                bw.alive.push_back(1);
            }
        } else {
            // Flat tetrahedra are only droppable when they sit on the hull.
            bool on_hull = false;
            for (int j = 0; j <= n && !on_hull; ++j)
                on_hull = find_sharer(bw.facet_opposite(bw.cells[flat], j), flat) < 0;
            if (!on_hull)
                throw MeshError("degenerate interior point configuration is not supported");
            bw.alive[flat] = 0;
        }
    }

    Triangulation t;
    t.n = n;
    t.vertices = points;
    for (size_t c = 0; c < bw.cells.size(); ++c)
        if (bw.alive[c]) t.simplices.push_back(bw.cells[c]);
    if (t.simplices.empty()) throw MeshError("triangulation collapsed to nothing");

    std::vector<char> used(points.size(), 0);
    for (const auto& s : t.simplices)
        for (int v : s) used[v] = 1;
    for (size_t i = 0; i < points.size(); ++i)
        if (!used[i]) throw MeshError("point " + std::to_string(i) + " ended up outside the triangulation");

    rebuild_topology(t);
    return t;
}

}  // namespace cpa
