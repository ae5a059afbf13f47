#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cpa/expr.hpp"
#include "cpa/lp.hpp"
#include "cpa/mesh.hpp"

namespace cpa {

struct CertError : std::runtime_error {
    explicit CertError(const std::string& msg) : std::runtime_error(msg) {}
};

// A candidate is accepted when no recomputed slack (and no verification
// deficit) exceeds this.
constexpr double kViableTol = 1e-7;

// Per-simplex curvature bound: beta[i] encloses the largest |second partial
// derivative| of any dynamics component over the simplex's bounding box.
struct BetaTable {
    std::vector<double> beta;
    std::vector<std::vector<Interval>> boxes;  // the boxes the bounds cover
};

BetaTable compute_beta(const SystemModel& m, const Triangulation& t);

// Candidate CPA Lyapunov function: one value per vertex, one gradient-bound
// vector per simplex, and optionally one slack per vertex.
struct CpaCandidate {
    std::vector<double> values;
    std::vector<std::vector<double>> gradient_bounds;
    std::vector<double> slacks;  // empty unless produced by the slack program
};

// Index of the vertex at the origin. Throws CertError if there is none (the
// equilibrium must be a mesh vertex).
int origin_vertex(const Triangulation& t);

// Strict feasibility program: variables V_x (lower-bounded by the vertex norm,
// the origin fixed to 0) and l_{i,k} >= 0; for each simplex, 2n rows bound the
// interpolant gradient componentwise by l_i and n+1 rows enforce the decrease
// condition grad'f(x_j) + c_j*beta_i*sum(l_i)/2 <= -|x_j| at each vertex.
// The objective is zero.
LinearProgram assemble_feasibility_lp(const SystemModel& m, const Triangulation& t,
                                      const BetaTable& beta);

// Relaxation of the feasibility program: one slack u_x >= -alpha per vertex is
// subtracted from that vertex's decrease rows and the slack sum is minimized.
// Always solvable; the mesh admits a Lyapunov function iff no slack is
// positive at the optimum.
LinearProgram assemble_slack_lp(const SystemModel& m, const Triangulation& t,
                                const BetaTable& beta, double alpha);

struct CertificateResult {
    LpStatus status = LpStatus::NumericalFailure;
    CpaCandidate candidate;  // populated only when status is Optimal
    double objective = 0.0;  // slack sum reported by the solver
    double max_slack = 0.0;  // largest recomputed slack
    bool viable = false;     // max_slack <= kViableTol
};

// Solves the slack program and extracts a candidate with the gradient bounds
// tightened to the exact interpolant gradients and the slacks recomputed from
// those, so the candidate satisfies the program by construction (never worse
// than the solver's assignment).
CertificateResult solve_slack_certificate(const SystemModel& m, const Triangulation& t,
                                          const BetaTable& beta, double alpha);

// Margins by which a candidate satisfies each certificate condition; negative
// means violated. `viable` requires every margin >= -kViableTol.
struct VerifyReport {
    bool viable = false;
    double positivity_margin = 0.0;  // min of V_x - |x|, and -|V_origin|
    double gradient_margin = 0.0;    // min of l_{i,k} - |grad_k|
    double decrease_margin = 0.0;    // min of -|x_j| - (grad'f + c*beta*1'l/2)
    double sample_margin = 0.0;      // min of -|x| - grad'f at sampled points
};

// Independent recheck: re-derives beta and the geometry from scratch, tests
// the candidate against every certificate condition, and samples 10^4 domain
// points (fixed seed) for the decrease inequality.
VerifyReport verify_certificate(const SystemModel& m, const Triangulation& t,
                                const CpaCandidate& cand);

// JSON round-trip: {"values": {"<vertex>": real, ...},
// "gradient_bounds": [[real, ...], ...], "slacks": [real, ...]} with the
// slacks omitted when empty.
void save_candidate(const CpaCandidate& c, const std::string& path);
CpaCandidate load_candidate(const std::string& path);

}  // namespace cpa
