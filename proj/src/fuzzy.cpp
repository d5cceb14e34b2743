#include "arag/fuzzy.hpp"

#include "arag/text.hpp"

#include <algorithm>
#include <vector>

namespace arag {

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    if (b.empty()) return a.size();

    std::vector<std::size_t> prev(a.size() + 1), cur(a.size() + 1);
    for (std::size_t i = 0; i <= a.size(); ++i) cur[i] = i;

    for (std::size_t j = 1; j <= b.size(); ++j) {
        std::swap(prev, cur);
        cur[0] = j;
        for (std::size_t i = 1; i <= a.size(); ++i) {
            std::size_t sub = prev[i - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[i] = std::min({cur[i - 1] + 1, prev[i] + 1, sub});
        }
    }
    return cur[a.size()];
}

double similarity(std::string_view a, std::string_view b) {
    std::u32string ua = utf8::to_codepoints(a);
    std::u32string ub = utf8::to_codepoints(b);
    std::size_t longest = std::max(ua.size(), ub.size());
    if (longest == 0) return 1.0;
    std::size_t dist = levenshtein(ua, ub);
    return 1.0 - static_cast<double>(dist) / static_cast<double>(longest);
}

} // namespace arag
