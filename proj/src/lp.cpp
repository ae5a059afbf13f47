#include "cpa/lp.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace cpa {

std::string to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
        case LpStatus::NumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

double max_row_violation(const LinearProgram& lp, const std::vector<double>& x) {
    double worst = -kInf;
    for (int j = 0; j < lp.num_vars(); ++j) {
        worst = std::max(worst, lp.lower[j] - x[j]);
        worst = std::max(worst, x[j] - lp.upper[j]);
    }
    for (const auto& row : lp.rows) {
        double lhs = 0.0;
        for (auto [j, v] : row.coeffs) lhs += v * x[j];
        worst = std::max(worst, lhs - row.rhs);
    }
    return worst;
}

namespace {

std::string mps_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_mps(const LinearProgram& lp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw LpError("cannot open '" + path + "' for writing");

    out << "NAME LP\n";
    out << "ROWS\n";
    out << " N COST\n";
    for (int i = 0; i < lp.num_rows(); ++i) out << " L R" << i << "\n";

    // Free MPS is column-major: gather each variable's row entries, merging
    // duplicates (repeated references to one variable within a row).
    std::vector<std::vector<std::pair<int, double>>> by_col(lp.num_vars());
    for (int i = 0; i < lp.num_rows(); ++i)
        for (auto [j, v] : lp.rows[i].coeffs) by_col[j].push_back({i, v});
    for (auto& col : by_col) {
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

    out << "COLUMNS\n";
    for (int j = 0; j < lp.num_vars(); ++j) {
        const std::string& name = lp.names[j];
        if (lp.objective[j] != 0.0)
            out << " " << name << " COST " << mps_num(lp.objective[j]) << "\n";
        for (auto [i, v] : by_col[j])
            out << " " << name << " R" << i << " " << mps_num(v) << "\n";
    }

    out << "RHS\n";
    for (int i = 0; i < lp.num_rows(); ++i)
        if (lp.rows[i].rhs != 0.0)
            out << " RHS R" << i << " " << mps_num(lp.rows[i].rhs) << "\n";

    // Default MPS bounds are [0, inf); emit the difference explicitly.
    out << "BOUNDS\n";
    for (int j = 0; j < lp.num_vars(); ++j) {
        double lo = lp.lower[j], hi = lp.upper[j];
        const std::string& name = lp.names[j];
        if (lo == -kInf && hi == kInf) {
            out << " FR BND " << name << "\n";
            continue;
        }
        if (lo == -kInf) out << " MI BND " << name << "\n";
        else if (lo != 0.0) out << " LO BND " << name << " " << mps_num(lo) << "\n";
        if (hi != kInf) out << " UP BND " << name << " " << mps_num(hi) << "\n";
    }
    out << "ENDATA\n";
    if (!out) throw LpError("write to '" + path + "' failed");
}

void write_lp_json(const LinearProgram& lp, const std::string& path) {
    nlohmann::json doc;
    doc["c"] = lp.objective;
    doc["lo"] = nlohmann::json::array();
    doc["up"] = nlohmann::json::array();
    for (int j = 0; j < lp.num_vars(); ++j) {
        doc["lo"].push_back(lp.lower[j] == -kInf ? nlohmann::json() : nlohmann::json(lp.lower[j]));
        doc["up"].push_back(lp.upper[j] == kInf ? nlohmann::json() : nlohmann::json(lp.upper[j]));
    }
    doc["rows"] = nlohmann::json::array();
    for (const auto& row : lp.rows) {
        nlohmann::json r;
        r["rhs"] = row.rhs;
        r["coeffs"] = nlohmann::json::array();
        for (auto [j, v] : row.coeffs) r["coeffs"].push_back({j, v});
        doc["rows"].push_back(std::move(r));
    }
    std::ofstream out(path);
    if (!out) throw LpError("cannot open '" + path + "' for writing");
    out << doc.dump() << "\n";
    if (!out) throw LpError("write to '" + path + "' failed");
}

}  // namespace cpa
