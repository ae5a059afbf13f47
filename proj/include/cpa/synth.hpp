#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpa/cert.hpp"
#include "cpa/expr.hpp"
#include "cpa/mesh.hpp"

namespace cpa {

struct SynthError : std::runtime_error {
    explicit SynthError(const std::string& msg) : std::runtime_error(msg) {}
};

// The meshing strategies: a uniform grid solved once; method 1 (the grid
// refined adaptively where the decrease condition is violated); method 2
// (vertices placed from the curvature structure of the dynamics, solved
// once); method 3 (the method-2 mesh refined adaptively).
enum class MeshMethod { Grid, Method1, Method2, Method3 };

// Canonical short names "grid", "m1", "m2", "m3".
std::string to_string(MeshMethod method);
// Accepts the short names and the long forms "method1".."method3".
MeshMethod parse_method(const std::string& text);

struct SynthesisConfig {
    MeshMethod method = MeshMethod::Grid;
    std::vector<double> grid_spacing;  // per axis; grid and method 1
    int points_per_segment = 2;        // per convexity segment; methods 2 and 3
    // Fallback spacing, keyed by 1-based axis, for axes the dynamics are
    // affine in (no curvature structure to place vertices from).
    std::map<int, double> linear_axis_spacing;
    double alpha = 1.0;        // slack floor of the relaxed program
    int max_iterations = 1000; // LP solves before giving up
    double prune_radius = 0.05;  // drop generated coordinates this close to 0
};

// One slack-LP solve. `worst_simplex` is the simplex with the largest
// vertex-slack sum, chosen for bisection after this solve; -1 when the run
// stopped here instead (viable, out of budget, or solver failure).
struct IterationRecord {
    int iteration = 0;  // 1-based
    int vertex_count = 0;
    int simplex_count = 0;
    double max_slack = 0.0;  // NaN when the solve failed
    int worst_simplex = -1;
    double wall_ms = 0.0;
};

enum class SynthVerdict { Viable, BudgetExhausted, SolverFailure };

std::string to_string(SynthVerdict v);

struct SynthesisReport {
    SynthVerdict verdict = SynthVerdict::SolverFailure;
    std::vector<IterationRecord> iterations;
    Triangulation mesh;      // final state of the mesh
    CpaCandidate candidate;  // from the last successful solve
    int initial_simplices = 0;
    int delta_simplices = 0;  // final minus initial simplex count
};

// Throws SynthError unless max_iterations >= 1, prune_radius > 0 and
// points_per_segment >= 2.
void validate_config(const SynthesisConfig& cfg);

// The adaptive loop: solve the slack program on t; if every recomputed slack
// is non-positive, stop viable (the candidate is independently re-verified
// first). Otherwise bisect the simplex whose vertices carry the largest total
// slack (ties to the lowest index) and repeat. Stops budget-exhausted after
// cfg.max_iterations solves or when bisecting the chosen simplex would create
// an edge shorter than 1e-6; a failed solve stops the loop with the partial
// record trail and verdict SolverFailure.
SynthesisReport adapt(const SystemModel& m, Triangulation t, const SynthesisConfig& cfg);

// Vertex set for methods 2 and 3. Per axis: every univariate factor the
// dynamics contain in that variable contributes the roots of its second
// derivative, splitting the axis into segments of constant convexity;
// points_per_segment coordinates are placed per segment, equally spaced and
// including the segment ends. Coordinates within prune_radius of the origin
// are dropped and 0 is always included. Axes without univariate factors use
// cfg.linear_axis_spacing. Returns the Cartesian product of the axis sets.
std::vector<std::vector<double>> method2_vertices(const SystemModel& m,
                                                  const SynthesisConfig& cfg);

// Builds the configured initial mesh (uniform grid, or Delaunay over the
// method-2 vertices) and runs either a single solve (grid, method 2) or the
// adaptive loop (methods 1 and 3).
SynthesisReport run_method(const SystemModel& m, const SynthesisConfig& cfg);

}  // namespace cpa
