#pragma once

#include <string>
#include <string_view>

namespace pcion {

// Locale-independent number text. `shortest` round-trips exactly.
std::string shortest(double x);
std::string fixed(double x, int decimals);
bool parse_number(std::string_view text, double& out);

} // namespace pcion
