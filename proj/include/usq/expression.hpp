// expression.hpp: arithmetic on numbers, named symbols and spectrum-relative
// frequency functions, used to resolve scenario parameters after the
// Hamiltonian has been diagonalized.
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := ('+' | '-') factor | number | name | name '(' args ')' | '(' expr ')'
//
// Built-in: pi, sqrt/sin/cos/tan/atan/exp(x), level(i) = E_i - E_0, gap(i, j) = E_j - E_i,
// midpoint(i, j) = (E_i + E_j)/2 - E_0.

#pragma once

#include "usq/spectrum.hpp"

#include <map>
#include <string>
#include <string_view>

namespace usq {

struct ExpressionContext {
    std::map<std::string, double, std::less<>> symbols;
    const Spectrum* spectrum = nullptr; ///< required by level/gap/midpoint
};

/// Throws ConfigError on syntax errors, unknown names or out-of-range levels.
double evaluate_expression(std::string_view text, const ExpressionContext& ctx);

} // namespace usq
