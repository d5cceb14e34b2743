#pragma once

#include <cstddef>
#include <string_view>

namespace arag {

// Edit distance over code points, two-row dynamic program.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

// 1 - distance / max(code point lengths); 1.0 when both strings are empty.
double similarity(std::string_view a, std::string_view b);

} // namespace arag
