#include "cpa/cert.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"

namespace cpa {

namespace {

constexpr int kSampleCount = 10000;
constexpr unsigned long long kSampleSeed = 987654321ULL;

double vertex_norm(const std::vector<double>& x) {
    double s = 0.0;
    for (double c : x) s += c * c;
    return std::sqrt(s);
}

// Appends (var, coeff) unless the coefficient is exactly zero; assembled rows
// stay as sparse as the dynamics allow.
void push_coeff(std::vector<std::pair<int, double>>& coeffs, int var, double v) {
    if (v != 0.0) coeffs.emplace_back(var, v);
}

bool is_zero_const(const Expr& e) { return e->kind == ExprKind::Const && e->value == 0.0; }

// The distinct, not identically zero second partials d2 f_q / dx_r dx_s for
// r <= s (the Hessians are symmetric).
std::vector<Expr> second_partials(const SystemModel& m) {
    std::vector<Expr> parts;
    for (const Expr& f : m.components)
        for (int r = 1; r <= m.n; ++r) {
            const Expr dr = differentiate(f, r);
            if (is_zero_const(dr)) continue;
            for (int s = r; s <= m.n; ++s) {
                Expr drs = differentiate(dr, s);
                if (!is_zero_const(drs)) parts.push_back(std::move(drs));
            }
        }
    return parts;
}

void check_pairing(const SystemModel& m, const Triangulation& t) {
    if (m.n != t.n)
        throw CertError("system dimension " + std::to_string(m.n) + " does not match mesh dimension " +
                        std::to_string(t.n));
}

// Shared builder for the feasibility and slack programs; `alpha < 0` selects
// the strict feasibility form (no slack variables, zero objective).
LinearProgram assemble(const SystemModel& m, const Triangulation& t, const BetaTable& beta,
                       double alpha) {
    check_pairing(m, t);
    const int n = t.n;
    const int nv = t.vertex_count();
    const int ns = t.simplex_count();
    if (static_cast<int>(beta.beta.size()) != ns)
        throw CertError("beta table covers " + std::to_string(beta.beta.size()) + " simplices, mesh has " +
                        std::to_string(ns));
    const bool slack = alpha >= 0.0;
    const int origin = origin_vertex(t);

    LinearProgram lp;
    for (int j = 0; j < nv; ++j) {
        const std::string name = "V_" + std::to_string(j);
        if (j == origin)
            lp.add_variable(name, 0.0, 0.0);
        else
            lp.add_variable(name, vertex_norm(t.vertices[j]), kInf);
    }
    for (int i = 0; i < ns; ++i)
        for (int k = 0; k < n; ++k)
            lp.add_variable("l_" + std::to_string(i) + "_" + std::to_string(k), 0.0, kInf);
    const int slack_base = lp.num_vars();
    if (slack)
        for (int j = 0; j < nv; ++j)
            lp.add_variable("u_" + std::to_string(j), -alpha, kInf, 1.0);

    lp.rows.reserve(static_cast<size_t>(ns) * (3 * n + 1));
    std::vector<std::pair<int, double>> coeffs;
    for (int i = 0; i < ns; ++i) {
        const SimplexGeometry g = simplex_geometry(t, i);
        const auto& s = t.simplices[i];
        const int lbase = nv + i * n;

        // +-grad(V)_k <= l_{i,k}, with grad(V) = Xinv * (V_{s_j} - V_{s_0}).
        for (int k = 0; k < n; ++k) {
            for (int sign : {+1, -1}) {
                coeffs.clear();
                double at0 = 0.0;
                for (int j = 1; j <= n; ++j) {
                    const double w = sign * g.Xinv(k, j - 1);
                    push_coeff(coeffs, s[j], w);
                    at0 -= w;
                }
                push_coeff(coeffs, s[0], at0);
                coeffs.emplace_back(lbase + k, -1.0);
                lp.add_row(coeffs, 0.0);
            }
        }

        // grad(V)'f(x_j) + c_j*beta_i*sum(l_i)/2 (- u_{x_j}) <= -|x_j|.
        for (int j = 0; j <= n; ++j) {
            const std::vector<double> fx = evaluate_field(m, t.vertices[s[j]]);
            const Eigen::VectorXd d =
                g.Xinv.transpose() * Eigen::Map<const Eigen::VectorXd>(fx.data(), n);
            coeffs.clear();
            double at0 = 0.0;
            for (int jj = 1; jj <= n; ++jj) {
                push_coeff(coeffs, s[jj], d(jj - 1));
                at0 -= d(jj - 1);
            }
            push_coeff(coeffs, s[0], at0);
            const double lw = 0.5 * g.c[j] * beta.beta[i];
            for (int k = 0; k < n; ++k) push_coeff(coeffs, lbase + k, lw);
            if (slack) coeffs.emplace_back(slack_base + s[j], -1.0);
            lp.add_row(coeffs, -vertex_norm(t.vertices[s[j]]));
        }
    }
    return lp;
}

}  // namespace

int origin_vertex(const Triangulation& t) {
    for (int j = 0; j < t.vertex_count(); ++j) {
        bool zero = true;
        for (double c : t.vertices[j]) zero &= c == 0.0;
        if (zero) return j;
    }
    throw CertError("triangulation has no vertex at the origin");
}

BetaTable compute_beta(const SystemModel& m, const Triangulation& t) {
    check_pairing(m, t);
    const std::vector<Expr> parts = second_partials(m);

    BetaTable out;
    out.beta.reserve(t.simplex_count());
    out.boxes.reserve(t.simplex_count());
    for (const auto& s : t.simplices) {
        std::vector<Interval> box(t.n);
        for (int k = 0; k < t.n; ++k) {
            double lo = t.vertices[s[0]][k], hi = lo;
            for (int j = 1; j <= t.n; ++j) {
                lo = std::min(lo, t.vertices[s[j]][k]);
                hi = std::max(hi, t.vertices[s[j]][k]);
            }
            box[k] = Interval(lo, hi);
        }
        double b = 0.0;
        for (const Expr& p : parts) b = std::max(b, interval_evaluate(p, box).mag());
        out.beta.push_back(b);
        out.boxes.push_back(std::move(box));
    }
    return out;
}

LinearProgram assemble_feasibility_lp(const SystemModel& m, const Triangulation& t,
                                      const BetaTable& beta) {
    return assemble(m, t, beta, -1.0);
}

LinearProgram assemble_slack_lp(const SystemModel& m, const Triangulation& t,
                                const BetaTable& beta, double alpha) {
    if (!(alpha > 0.0)) throw CertError("alpha must be positive");
    return assemble(m, t, beta, alpha);
}

CertificateResult solve_slack_certificate(const SystemModel& m, const Triangulation& t,
                                          const BetaTable& beta, double alpha) {
    const LinearProgram lp = assemble_slack_lp(m, t, beta, alpha);
    const LpSolution sol = solve_lp(lp);

    CertificateResult r;
    r.status = sol.status;
    if (sol.status != LpStatus::Optimal) return r;
    r.objective = sol.objective;

    const int n = t.n;
    const int nv = t.vertex_count();
    CpaCandidate c;
    c.values.assign(sol.x.begin(), sol.x.begin() + nv);
    c.gradient_bounds.resize(t.simplex_count());
    c.slacks.assign(nv, -alpha);
    for (int i = 0; i < t.simplex_count(); ++i) {
        const Eigen::VectorXd grad = cpa_gradient(t, i, c.values);
        c.gradient_bounds[i].resize(n);
        for (int k = 0; k < n; ++k) c.gradient_bounds[i][k] = std::abs(grad(k));
        const double lsum = grad.cwiseAbs().sum();
        const SimplexGeometry g = simplex_geometry(t, i);
        const auto& s = t.simplices[i];
        for (int j = 0; j <= n; ++j) {
            const std::vector<double> fx = evaluate_field(m, t.vertices[s[j]]);
            const double lhs = grad.dot(Eigen::Map<const Eigen::VectorXd>(fx.data(), n)) +
                               0.5 * g.c[j] * beta.beta[i] * lsum + vertex_norm(t.vertices[s[j]]);
            c.slacks[s[j]] = std::max(c.slacks[s[j]], lhs);
        }
    }
    r.max_slack = *std::max_element(c.slacks.begin(), c.slacks.end());
    r.viable = r.max_slack <= kViableTol;
    r.candidate = std::move(c);
    return r;
}

VerifyReport verify_certificate(const SystemModel& m, const Triangulation& t,
                                const CpaCandidate& cand) {
    check_pairing(m, t);
    const int n = t.n;
    const int nv = t.vertex_count();
    const int ns = t.simplex_count();
    if (static_cast<int>(cand.values.size()) != nv)
        throw CertError("candidate has " + std::to_string(cand.values.size()) +
                        " values for a mesh with " + std::to_string(nv) + " vertices");
    if (static_cast<int>(cand.gradient_bounds.size()) != ns)
        throw CertError("candidate has " + std::to_string(cand.gradient_bounds.size()) +
                        " gradient bounds for a mesh with " + std::to_string(ns) + " simplices");
    for (const auto& l : cand.gradient_bounds)
        if (static_cast<int>(l.size()) != n) throw CertError("gradient bound arity mismatch");

    const BetaTable beta = compute_beta(m, t);
    const int origin = origin_vertex(t);

    VerifyReport r;
    r.positivity_margin = -std::abs(cand.values[origin]);
    for (int j = 0; j < nv; ++j) {
        if (j == origin) continue;
        r.positivity_margin =
            std::min(r.positivity_margin, cand.values[j] - vertex_norm(t.vertices[j]));
    }

    r.gradient_margin = kInf;
    r.decrease_margin = kInf;
    std::vector<Eigen::VectorXd> grads(ns);
    for (int i = 0; i < ns; ++i) {
        grads[i] = cpa_gradient(t, i, cand.values);
        double lsum = 0.0;
        for (int k = 0; k < n; ++k) {
            lsum += cand.gradient_bounds[i][k];
            r.gradient_margin =
                std::min(r.gradient_margin, cand.gradient_bounds[i][k] - std::abs(grads[i](k)));
        }
        const SimplexGeometry g = simplex_geometry(t, i);
        const auto& s = t.simplices[i];
        for (int j = 0; j <= n; ++j) {
            const std::vector<double> fx = evaluate_field(m, t.vertices[s[j]]);
            const double lhs = grads[i].dot(Eigen::Map<const Eigen::VectorXd>(fx.data(), n)) +
                               0.5 * g.c[j] * beta.beta[i] * lsum;
            r.decrease_margin =
                std::min(r.decrease_margin, -vertex_norm(t.vertices[s[j]]) - lhs);
        }
    }

    // Sampled decrease check across the whole domain, not just the vertices.
    std::mt19937_64 rng(kSampleSeed);
    std::vector<std::uniform_real_distribution<double>> axis;
    axis.reserve(n);
    for (int k = 0; k < n; ++k) axis.emplace_back(m.domain[k].lo, m.domain[k].hi);
    r.sample_margin = kInf;
    std::vector<double> x(n);
    for (int s = 0; s < kSampleCount; ++s) {
        for (int k = 0; k < n; ++k) x[k] = axis[k](rng);
        const int i = locate(t, x).first;
        const std::vector<double> fx = evaluate_field(m, x);
        const double lhs = grads[i].dot(Eigen::Map<const Eigen::VectorXd>(fx.data(), n));
        r.sample_margin = std::min(r.sample_margin, -vertex_norm(x) - lhs);
    }

    r.viable = r.positivity_margin >= -kViableTol && r.gradient_margin >= -kViableTol &&
               r.decrease_margin >= -kViableTol && r.sample_margin >= -kViableTol;
    return r;
}

void save_candidate(const CpaCandidate& c, const std::string& path) {
    nlohmann::json j;
    nlohmann::json values = nlohmann::json::object();
    for (size_t i = 0; i < c.values.size(); ++i) values[std::to_string(i)] = c.values[i];
    j["values"] = std::move(values);
    j["gradient_bounds"] = c.gradient_bounds;
    if (!c.slacks.empty()) j["slacks"] = c.slacks;
    std::ofstream out(path);
    if (!out) throw CertError("cannot open " + path + " for writing");
    out << j.dump() << "\n";
}

CpaCandidate load_candidate(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CertError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CertError(path + ": " + std::string(e.what()));
    }

    CpaCandidate c;
    try {
        const auto& values = j.at("values");
        c.values.assign(values.size(), 0.0);
        for (auto it = values.begin(); it != values.end(); ++it) {
            const size_t idx = std::stoul(it.key());
            if (idx >= c.values.size()) throw CertError(path + ": vertex index out of range");
            c.values[idx] = it.value().get<double>();
        }
        c.gradient_bounds = j.at("gradient_bounds").get<std::vector<std::vector<double>>>();
        if (j.contains("slacks")) c.slacks = j.at("slacks").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw CertError(path + ": " + std::string(e.what()));
    } catch (const std::invalid_argument&) {
        throw CertError(path + ": vertex keys must be integers");
    } catch (const std::out_of_range&) {
        throw CertError(path + ": vertex index out of range");
    }
    return c;
}

}  // namespace cpa
