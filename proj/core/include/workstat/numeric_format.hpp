#pragma once

#include <string>

namespace workstat {

/// Shortest decimal representation that parses back to the same double.
/// Infinities are written as "inf" / "-inf", NaN as "nan".
std::string format_double(double value);

/// Inverse of format_double. Throws InvalidArgument on malformed text.
double parse_double(const std::string& text);

}  // namespace workstat
