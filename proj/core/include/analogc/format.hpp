#pragma once

#include <string>

namespace analogc {

/// Shortest text that parses back to exactly `value` (may use exponent notation).
std::string format_real(double value);

/// Shortest round-tripping text without exponent notation.
std::string format_fixed(double value);

/// printf-style "%.17g".
std::string format_17g(double value);

} // namespace analogc
