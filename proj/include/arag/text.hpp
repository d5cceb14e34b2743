#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace arag {

namespace utf8 {

// Decodes the code point starting at byte `pos`; returns the number of bytes
// consumed (>= 1, malformed bytes decode as one-byte replacements).
std::size_t decode(std::string_view s, std::size_t pos, char32_t& cp);

std::u32string to_codepoints(std::string_view s);
std::size_t length(std::string_view s);

bool is_space(char32_t cp);
bool is_cjk(char32_t cp);

} // namespace utf8

// Byte range [start, end) into the source text.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;
};

// One segmented sentence of an input record. `text` is the exact source
// substring covered by `span` (byte offsets), trimmed of surrounding
// whitespace; sentence terminators stay part of the unit.
struct TextUnit {
    std::size_t index = 0;
    std::string text;
    Span span;
};

struct SegmentationConfig {
    // Sentence-ending code points. ASCII '.' only terminates when followed by
    // whitespace or end of text, so decimals like "3.5 mg" survive.
    std::vector<std::string> terminators;
    std::size_t max_unit_chars = 512; // code points, hard split above this
    bool strip_whitespace = true;

    static SegmentationConfig defaults();
    void validate() const; // throws ConfigError
};

// Splits raw record text into ordered units. Whitespace-only candidates are
// dropped; the concatenation of spans plus the whitespace between them
// reconstructs the source. Throws EmptyInput on empty/all-whitespace text.
std::vector<TextUnit> segment(std::string_view text, const SegmentationConfig& config);

std::string trim(std::string_view s);

} // namespace arag
