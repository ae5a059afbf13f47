#pragma once

// Shared checks for the mesh-oriented test binaries.

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "cpa/mesh.hpp"

namespace test_support {

// Barycentric coordinates of x with respect to simplex i.
inline std::vector<double> bary(const cpa::Triangulation& t, int i, const std::vector<double>& x) {
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

// Brute-force conformity battery:
//  - no facet shared by more than two simplices (rebuild_topology throws),
//  - no vertex of the mesh lies on another simplex without being one of its
//    vertices (hanging nodes, the failure mode of a broken bisection).
// Returns an empty string when clean, else a description.
inline std::string conformity_defect(const cpa::Triangulation& t) {
    cpa::Triangulation copy = t;
    try {
        cpa::rebuild_topology(copy);
    } catch (const cpa::MeshError& e) {
        return e.what();
    }
    for (int v = 0; v < t.vertex_count(); ++v) {
        for (int i = 0; i < t.simplex_count(); ++i) {
            bool member = false;
            for (int u : t.simplices[i]) member |= u == v;
            if (member) continue;
            std::vector<double> lam = bary(t, i, t.vertices[v]);
            bool inside = true;
            for (double l : lam) inside &= l >= -1e-9;
            if (inside)
                return "vertex " + std::to_string(v) + " lies on simplex " + std::to_string(i) +
                       " without being a vertex of it";
        }
    }
    return "";
}

}  // namespace test_support
