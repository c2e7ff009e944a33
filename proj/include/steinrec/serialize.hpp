#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "steinrec/dist.hpp"

namespace steinrec {

/// Decimal with 17 significant digits; parses back to the same double.
std::string format_real(double x);

/// Plain-text law records. The first line is a header
///
///   discrete <n>                      followed by n lines "<atom> <prob>"
///   piecewise_linear <n>              followed by n lines "<x> <F(x)>"
///   empirical <n> <seed> <stream>     followed by n lines "<value>"
///   normal 0
///
/// Numbers are written with format_real, so write/read is exact.
void write_law(std::ostream& os, const Law& law);
Law read_law(std::istream& is);

std::string to_record(const Law& law);
Law from_record(std::string_view text);

}  // namespace steinrec
