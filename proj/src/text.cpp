#include "arag/text.hpp"

#include "arag/errors.hpp"

#include <unordered_set>

namespace arag {

namespace utf8 {

std::size_t decode(std::string_view s, std::size_t pos, char32_t& cp) {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    unsigned char b0 = byte(pos);
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    }
    std::size_t len = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        cp = 0xFFFD;
        return 1;
    }
    if (pos + len > s.size()) {
        cp = 0xFFFD;
        return 1;
    }
    for (std::size_t i = 1; i < len; ++i) {
        unsigned char b = byte(pos + i);
        if ((b & 0xC0) != 0x80) {
            cp = 0xFFFD;
            return 1;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    return len;
}

std::u32string to_codepoints(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    while (pos < s.size()) {
        char32_t cp = 0;
        pos += decode(s, pos, cp);
        out.push_back(cp);
    }
    return out;
}

std::size_t length(std::string_view s) {
    std::size_t n = 0, pos = 0;
    while (pos < s.size()) {
        char32_t cp = 0;
        pos += decode(s, pos, cp);
        ++n;
    }
    return n;
}

bool is_space(char32_t cp) {
    switch (cp) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\f':
    case U'\v':
    case 0x00A0: // no-break space
    case 0x3000: // ideographic space
        return true;
    default:
        return false;
    }
}

bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF)    // unified ideographs
           || (cp >= 0x3400 && cp <= 0x4DBF) // extension A
           || (cp >= 0xF900 && cp <= 0xFAFF) // compatibility ideographs
           || (cp >= 0x3040 && cp <= 0x30FF); // kana
}

} // namespace utf8

std::string trim(std::string_view s) {
    std::size_t start = 0;
    while (start < s.size()) {
        char32_t cp = 0;
        std::size_t n = utf8::decode(s, start, cp);
        if (!utf8::is_space(cp)) break;
        start += n;
    }
    std::size_t end = s.size();
    while (end > start) {
        // walk back to the previous code point start
        std::size_t prev = end - 1;
        while (prev > start && (static_cast<unsigned char>(s[prev]) & 0xC0) == 0x80) --prev;
        char32_t cp = 0;
        utf8::decode(s, prev, cp);
        if (!utf8::is_space(cp)) break;
        end = prev;
    }
    return std::string(s.substr(start, end - start));
}

SegmentationConfig SegmentationConfig::defaults() {
    SegmentationConfig cfg;
    cfg.terminators = {"。", "！", "？", "；", ".", "!", "?", ";", "\n"};
    return cfg;
}

void SegmentationConfig::validate() const {
    if (terminators.empty()) raise(Errc::ConfigError, "segmentation: terminators must be non-empty");
    if (max_unit_chars < 8) raise(Errc::ConfigError, "segmentation: max_unit_chars must be >= 8");
    for (const auto& t : terminators) {
        if (t.empty() || utf8::length(t) != 1)
            raise(Errc::ConfigError, "segmentation: each terminator must be a single code point");
    }
}

std::vector<TextUnit> segment(std::string_view text, const SegmentationConfig& config) {
    config.validate();

    std::unordered_set<char32_t> terms;
    for (const auto& t : config.terminators) {
        char32_t cp = 0;
        utf8::decode(t, 0, cp);
        terms.insert(cp);
    }

    std::vector<TextUnit> units;
    bool in_unit = false;
    std::size_t unit_start = 0;    // byte offset of first code point in the unit
    std::size_t last_solid_end = 0; // byte offset one past the last non-space code point
    std::size_t unit_chars = 0;

    auto flush = [&](std::size_t raw_end) {
        if (!in_unit) return;
        std::size_t end = config.strip_whitespace ? last_solid_end : raw_end;
        if (end > unit_start) {
            TextUnit u;
            u.index = units.size();
            u.span = {unit_start, end};
            u.text = std::string(text.substr(unit_start, end - unit_start));
            units.push_back(std::move(u));
        }
        in_unit = false;
        unit_chars = 0;
    };

    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = 0;
        std::size_t n = utf8::decode(text, pos, cp);
        bool space = utf8::is_space(cp);

        if (!in_unit) {
            if (space) {
                pos += n;
                continue;
            }
            in_unit = true;
            unit_start = pos;
            last_solid_end = pos;
            unit_chars = 0;
        }

        if (!space) last_solid_end = pos + n;
        ++unit_chars;

        bool terminal = false;
        if (terms.count(cp) != 0) {
            if (cp == U'.') {
                // Latin full stop: only terminal before whitespace or EOT.
                std::size_t next = pos + n;
                if (next >= text.size()) {
                    terminal = true;
                } else {
                    char32_t nc = 0;
                    utf8::decode(text, next, nc);
                    terminal = utf8::is_space(nc);
                }
            } else {
                terminal = true;
            }
        }

        pos += n;
        if (terminal || unit_chars >= config.max_unit_chars) {
            flush(pos);
        }
    }
    flush(text.size());

    if (units.empty()) raise(Errc::EmptyInput, "segment: input is empty or all whitespace");
    return units;
}

} // namespace arag
