#include "arag/evaluate.hpp"

#include "arag/errors.hpp"
#include "arag/fuzzy.hpp"
#include "arag/text.hpp"

#include <algorithm>

namespace arag {

namespace {

bool is_delimiter(char32_t cp) {
    switch (cp) {
    case U',':
    case U';':
    case U'\n':
    case 0xFF0C: // ，
    case 0xFF1B: // ；
    case 0x3001: // 、
        return true;
    default:
        return false;
    }
}

bool is_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

bool is_marker_punct(char32_t cp) {
    return cp == U'.' || cp == U')' || cp == 0xFF09 /* ） */ || cp == 0x3001 /* 、 */;
}

// "1." / "2)" / "（3）" style list markers; "3.5" stays intact because a
// digit follows the dot.
std::size_t marker_length(const std::u32string& cps, std::size_t at) {
    std::size_t i = at;
    bool parenthesized = false;
    if (i < cps.size() && (cps[i] == U'(' || cps[i] == 0xFF08)) {
        parenthesized = true;
        ++i;
    }
    std::size_t digits = 0;
    while (i < cps.size() && is_digit(cps[i]) && digits < 3) {
        ++i;
        ++digits;
    }
    if (digits == 0) return 0;
    if (parenthesized) {
        if (i < cps.size() && (cps[i] == U')' || cps[i] == 0xFF09)) return i - at + 1;
        return 0;
    }
    if (i < cps.size() && is_marker_punct(cps[i])) {
        if (i + 1 < cps.size() && is_digit(cps[i + 1])) return 0; // decimal, not a marker
        return i - at + 1;
    }
    return 0;
}

void encode_cp(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

} // namespace

std::vector<std::string> extract_mentions(std::string_view text) {
    std::u32string cps = utf8::to_codepoints(trim(text));

    // strip a leading "Diagnosis:"-style header: a colon within the first 20
    // code points with no delimiter before it
    std::size_t start = 0;
    for (std::size_t i = 0; i < cps.size() && i < 20; ++i) {
        if (is_delimiter(cps[i])) break;
        if (cps[i] == U':' || cps[i] == 0xFF1A) {
            start = i + 1;
            break;
        }
    }

    std::vector<std::string> mentions;
    std::string current;
    auto flush = [&] {
        std::string t = trim(current);
        if (!t.empty()) mentions.push_back(std::move(t));
        current.clear();
    };

    bool at_boundary = true; // start of text or just after whitespace/delimiter
    for (std::size_t i = start; i < cps.size();) {
        char32_t cp = cps[i];
        if (is_delimiter(cp)) {
            flush();
            at_boundary = true;
            ++i;
            continue;
        }
        if (at_boundary) {
            std::size_t ml = marker_length(cps, i);
            if (ml > 0) {
                flush();
                i += ml;
                continue;
            }
        }
        encode_cp(cp, current);
        at_boundary = utf8::is_space(cp);
        ++i;
    }
    flush();
    return mentions;
}

DiagnosisSet link(std::span<const std::string> mentions,
                  std::span<const TerminologyEntry> terminology, double threshold) {
    if (terminology.empty()) raise(Errc::EmptyTerminology, "link: terminology is empty");
    if (!(threshold > 0.0 && threshold <= 1.0))
        raise(Errc::ConfigError, "link: threshold must be in (0,1]");

    DiagnosisSet out;
    for (const auto& mention : mentions) {
        double best = -1.0;
        const TerminologyEntry* best_entry = nullptr;
        for (const auto& entry : terminology) {
            double s = similarity(mention, entry.canonical);
            for (const auto& syn : entry.synonyms) s = std::max(s, similarity(mention, syn));
            if (s > best) { // strict: earlier entries win ties
                best = s;
                best_entry = &entry;
            }
        }
        if (best >= threshold && best_entry != nullptr) {
            out.codes.insert(best_entry->code);
        } else {
            out.unlinked.push_back(mention);
        }
    }
    return out;
}

namespace {

std::size_t intersection_size(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::size_t n = 0;
    for (const auto& x : a) n += b.count(x);
    return n;
}

EvalMetrics from_counts(std::size_t inter, std::size_t pred, std::size_t ref, std::size_t n_records) {
    EvalMetrics m;
    m.n_records = n_records;
    m.precision = pred == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(pred);
    m.recall = ref == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(ref);
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

} // namespace

EvalMetrics metrics(const DiagnosisSet& pred, const DiagnosisSet& ref) {
    return from_counts(intersection_size(pred.codes, ref.codes), pred.codes.size(),
                       ref.codes.size(), 1);
}

EvalMetrics aggregate(std::span<const RecordEval> records) {
    std::size_t inter = 0, pred = 0, ref = 0;
    for (const auto& r : records) {
        inter += r.intersection;
        pred += r.pred_size;
        ref += r.ref_size;
    }
    return from_counts(inter, pred, ref, records.size());
}

} // namespace arag
