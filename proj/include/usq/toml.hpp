// toml.hpp: reader for the TOML subset used by scenario files.
//
// Supported: comments, bare/quoted/dotted keys, [tables], [[arrays of
// tables]], basic and literal strings, integers, floats (incl. inf/nan,
// exponents, underscores), booleans, arrays (multi-line) and inline tables.
// Dates and multi-line strings are not supported.

#pragma once

#include "json.hpp"

#include <string_view>

namespace usq {

/// Parses TOML text into JSON. Throws ConfigError with a line number.
nlohmann::json parse_toml(std::string_view text);

} // namespace usq
