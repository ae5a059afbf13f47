#pragma once

#include <string>
#include <vector>

#include "cpa/expr.hpp"

namespace cpa {

// The built-in benchmark systems, keyed "A".."D": the pendulum (A), a
// two-dimensional polynomial system (B), a mixed trigonometric-polynomial
// system (C), and a three-dimensional polynomial system (D), each with its
// study domain. Throws ExprError for an unknown id.
SystemModel builtin_system(const std::string& id);

// Ids of all built-in systems, in benchmark order.
std::vector<std::string> builtin_system_ids();

}  // namespace cpa
