#pragma once

#include "arag/io.hpp"
#include "arag/llm.hpp"

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace arag {

enum class ParseStatus : std::uint8_t { Parsed, Unparseable };

struct FilterVerdict {
    std::string doc_id;
    bool support = true;
    ParseStatus parse_status = ParseStatus::Unparseable;
    std::string raw_output;
    std::string error; // gateway failure, if any
};

// Case-insensitive scan for SUPPORT / EXCLUDE; the token appearing first
// wins. Neither found -> Unparseable with support=true (fail-open: dropping
// evidence on a parsing glitch is worse than a longer prompt).
std::pair<bool, ParseStatus> parse_verdict(std::string_view text);

struct FilterResult {
    std::vector<KnowledgeDoc> kept; // rerank order preserved
    std::vector<FilterVerdict> verdicts; // one per input doc
};

// One differential-diagnosis call per document; documents judged EXCLUDE are
// dropped, everything else (including gateway failures) is kept. Verdict
// calls may run in parallel; output order always follows the input.
FilterResult filter_docs(std::string_view record_text, std::span<const KnowledgeDoc> docs,
                         LlmGateway& gateway, const PromptTemplate& diff_template,
                         bool parallel = true);

} // namespace arag
