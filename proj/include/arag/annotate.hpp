#pragma once

#include "arag/index.hpp"
#include "arag/llm.hpp"
#include "arag/text.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace arag {

struct MaskedVariant {
    std::size_t masked_index = 0;
    std::string text; // all units except the masked one, original separators kept
};

// Drops unit i, keeping the separators that followed the remaining units in
// the source. Throws IndexOutOfRange / TooFewUnits (n < 2 would leave an
// empty record).
MaskedVariant mask_unit(std::string_view source, std::span<const TextUnit> units, std::size_t i);

// True iff any disease mention extracted from `predicted` has normalized
// similarity >= threshold to any mention extracted from `reference`.
bool diagnosis_matches(std::string_view predicted, std::string_view reference, double threshold);

enum class AnnotationStrategy : std::uint8_t { S1, S2 };

// One label per unit with the evidence that produced it. S1 labels are
// masking-based (A/C), S2 labels are knowledge-probe-based (B/C).
struct AnnotationOutcome {
    std::string record_id;
    std::size_t unit_index = 0;
    char label = 'C';
    AnnotationStrategy strategy = AnnotationStrategy::S1;
    std::string full_diag;
    std::optional<std::string> masked_diag; // S1 only
    std::optional<bool> probe_hit;          // S2 only
};

struct AnnotateConfig {
    std::size_t top_m = 5;          // chunks per knowledge probe
    double match_threshold = 0.5;   // fuzzy threshold for diagnosis/title matching
    SegmentationConfig segmentation = SegmentationConfig::defaults();
    PromptTemplate diag_template = PromptTemplate::builtin(TemplateKind::Diag);
    double temperature = 0.0;
    int max_tokens = 1024;
};

struct RecordAnnotation {
    AnnotationStrategy strategy = AnnotationStrategy::S1;
    std::string full_diag;
    std::vector<AnnotationOutcome> outcomes; // unit order; skipped units omitted
    std::size_t skipped = 0;                 // units lost to gateway failures
};

// Strategy 1 (full-input diagnosis correct): mask each unit, label A when the
// masked diagnosis no longer matches the reference, C otherwise; n+1 LLM
// calls. Strategy 2 (full-input diagnosis wrong): probe the knowledge base
// with each unit, label B when a retrieved chunk's parent document title
// matches the reference diagnosis, C otherwise; 1 LLM call, n probes.
RecordAnnotation annotate_record(const EmrRecord& record, LlmGateway& gateway,
                                 const KnowledgeIndex& kb, const AnnotateConfig& config,
                                 bool parallel = true);

} // namespace arag
