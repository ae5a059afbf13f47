#include <fstream>

#include "cpa/mesh.hpp"
#include "json.hpp"

namespace cpa {

void save_mesh(const Triangulation& t, const std::string& path) {
    nlohmann::json j;
    j["n"] = t.n;
    j["vertices"] = t.vertices;
    j["simplices"] = t.simplices;
    std::ofstream out(path);
    if (!out) throw MeshError("cannot open " + path + " for writing");
    out << j.dump() << "\n";
}

Triangulation load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw MeshError(path + ": " + e.what());
    }

    Triangulation t;
    try {
        t.n = j.at("n").get<int>();
        t.vertices = j.at("vertices").get<std::vector<std::vector<double>>>();
        t.simplices = j.at("simplices").get<std::vector<std::vector<int>>>();
    } catch (const nlohmann::json::exception& e) {
        throw MeshError(path + ": " + e.what());
    }
    if (t.n < 1) throw MeshError(path + ": dimension must be positive");
    for (const auto& v : t.vertices)
        if (static_cast<int>(v.size()) != t.n) throw MeshError(path + ": vertex arity mismatch");
    for (const auto& s : t.simplices) {
        if (static_cast<int>(s.size()) != t.n + 1) throw MeshError(path + ": simplex arity mismatch");
        for (int v : s)
            if (v < 0 || v >= t.vertex_count()) throw MeshError(path + ": vertex index out of range");
    }
    rebuild_topology(t);
    return t;
}

}  // namespace cpa
