#include "cpa/systems.hpp"

#include <numbers>

namespace cpa {

namespace {

SystemModel make(const std::string& name, int n, const std::vector<std::string>& dynamics,
                 double extent) {
    SystemModel m;
    m.name = name;
    m.n = n;
    for (const auto& text : dynamics) m.components.push_back(parse_expression(text, n));
    m.domain.assign(n, Interval(-extent, extent));
    validate_model(m);
    return m;
}

}  // namespace

SystemModel builtin_system(const std::string& id) {
    const double half_pi = std::numbers::pi / 2.0;
    if (id == "A") return make("A", 2, {"x2", "-sin(x1) - x2"}, half_pi);
    if (id == "B")
        return make("B", 2, {"0.3*x1^5 - 0.5*x2^4 - 0.5*x1", "-0.5*x1^6 - 0.1*x2"}, 0.75);
    if (id == "C")
        return make("C", 2, {"0.5*x1^4*sin(x2) + 0.3*x2", "-0.5*x1 - 1.25*x2 - x2^3*x1"}, 1.0);
    if (id == "D")
        return make("D", 3,
                    {"-3*x1 + 0.5*x1 - x3*x2^4", "-x2*x3^4 - 2.5*x2 + 0.5*x3",
                     "-0.5*x2 - 5*x3 + x1*x2^2"},
                    1.0);
    throw ExprError("unknown system id '" + id + "'");
}

std::vector<std::string> builtin_system_ids() { return {"A", "B", "C", "D"}; }

}  // namespace cpa
