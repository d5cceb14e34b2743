#include "arag/filter.hpp"

#include <algorithm>
#include <cctype>

namespace arag {

namespace {

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::pair<bool, ParseStatus> parse_verdict(std::string_view text) {
    std::string folded = lower_ascii(text);
    std::size_t support_at = folded.find("support");
    std::size_t exclude_at = folded.find("exclude");
    if (support_at == std::string::npos && exclude_at == std::string::npos)
        return {true, ParseStatus::Unparseable};
    if (exclude_at == std::string::npos) return {true, ParseStatus::Parsed};
    if (support_at == std::string::npos) return {false, ParseStatus::Parsed};
    return {support_at < exclude_at, ParseStatus::Parsed};
}

FilterResult filter_docs(std::string_view record_text, std::span<const KnowledgeDoc> docs,
                         LlmGateway& gateway, const PromptTemplate& diff_template,
                         bool parallel) {
    FilterResult result;
    result.verdicts.resize(docs.size());

    const auto n = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        auto u = static_cast<std::size_t>(i);
        FilterVerdict& v = result.verdicts[u];
        v.doc_id = docs[u].doc_id;
        try {
            LlmRequest req;
            req.prompt = render(diff_template, {{"patient", std::string(record_text)},
                                                {"document", docs[u].title + "\n" + docs[u].body}});
            req.tag = "diff:" + docs[u].doc_id;
            LlmResponse resp = gateway.complete(req);
            v.raw_output = resp.text;
            std::tie(v.support, v.parse_status) = parse_verdict(resp.text);
        } catch (const std::exception& e) {
            // fail-open: keep the document, record what went wrong
            v.support = true;
            v.parse_status = ParseStatus::Unparseable;
            v.error = e.what();
        }
    }

    for (std::size_t i = 0; i < docs.size(); ++i)
        if (result.verdicts[i].support) result.kept.push_back(docs[i]);
    return result;
}

} // namespace arag
