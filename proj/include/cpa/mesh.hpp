#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cpa {

struct MeshError : std::runtime_error {
    explicit MeshError(const std::string& msg) : std::runtime_error(msg) {}
};

// Conforming simplicial triangulation of a box domain. Vertices are global;
// each simplex lists n+1 vertex indices. If a simplex touches the origin its
// flag is set and the origin is stored at local position 0.
struct Triangulation {
    int n = 0;
    std::vector<std::vector<double>> vertices;
    std::vector<std::vector<int>> simplices;
    // adjacency[i][j]: simplex sharing the facet opposite local vertex j of
    // simplex i, or -1 on the boundary. Rebuilt after structural changes.
    std::vector<std::vector<int>> adjacency;
    std::vector<char> origin_flag;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int simplex_count() const { return static_cast<int>(simplices.size()); }
};

// Per-simplex quantities used by the constraint assembly: the edge matrix
// X (rows x_j - x_0), its inverse, the curvature weights c_j, and the
// longest edge (local endpoints, by length with a deterministic tie-break).
struct SimplexGeometry {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Xinv;
    std::vector<double> c;
    int edge_a = 0;  // local vertex indices of the longest edge
    int edge_b = 1;
    double edge_length = 0.0;
};

// Lattice mesh: each axis-aligned cell is split into n! simplices sharing the
// main diagonal (one simplex per axis ordering). Every axis length must be an
// integer multiple of its spacing and the origin must be a lattice point.
Triangulation build_grid_mesh(const std::vector<std::pair<double, double>>& domain,
                              const std::vector<double>& spacing);

// Same cell split over arbitrary strictly-increasing coordinate lists, one
// per axis. Used by build_grid_mesh and by the product-lattice Delaunay path.
Triangulation build_rectilinear_mesh(const std::vector<std::vector<double>>& axes);

// Delaunay triangulation of a point set (n = 2 or 3). Points must include the
// origin and affinely span the space. Near-degenerate simplices are removed
// and the holes re-triangulated.
Triangulation build_delaunay_mesh(const std::vector<std::vector<double>>& points);

SimplexGeometry simplex_geometry(const Triangulation& t, int i);

// Gradient of the piecewise-affine interpolant of the per-vertex values W on
// simplex i: solves X g = Wbar with Wbar_j = W[v_j] - W[v_0].
Eigen::VectorXd cpa_gradient(const Triangulation& t, int i, const std::vector<double>& W);

// Bisects the longest edge of simplex i, propagating through every simplex
// that shares an edge being bisected so the result stays conforming
// (Rivara-style: a neighbor whose own longest edge differs is first bisected
// along that edge, recursively). Mutates t in place.
void refine_leb(Triangulation& t, int i);

// Finds the simplex containing x and its barycentric coordinates (ordered by
// the simplex's local vertices). Throws MeshError if x lies outside the mesh.
std::pair<int, std::vector<double>> locate(const Triangulation& t, const std::vector<double>& x);

double simplex_volume(const Triangulation& t, int i);
double total_volume(const Triangulation& t);

// Recomputes adjacency and origin bookkeeping (origin vertex moved to local
// position 0 in simplices that touch it). Called by the builders and refine.
void rebuild_topology(Triangulation& t);

// JSON round-trip: {"n": int, "vertices": [[...],...], "simplices": [[...],...]}
void save_mesh(const Triangulation& t, const std::string& path);
Triangulation load_mesh(const std::string& path);

}  // namespace cpa
