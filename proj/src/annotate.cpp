#include "arag/annotate.hpp"

#include "arag/errors.hpp"
#include "arag/evaluate.hpp"
#include "arag/fuzzy.hpp"

#include <atomic>

namespace arag {

MaskedVariant mask_unit(std::string_view source, std::span<const TextUnit> units, std::size_t i) {
    if (units.size() < 2)
        raise(Errc::TooFewUnits, "mask_unit: masking a " + std::to_string(units.size()) +
                                     "-unit record would leave it empty");
    if (i >= units.size())
        raise(Errc::IndexOutOfRange, "mask_unit: index " + std::to_string(i) + " out of range (n=" +
                                         std::to_string(units.size()) + ")");

    MaskedVariant variant;
    variant.masked_index = i;
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::size_t prev_kept = none;
    for (std::size_t j = 0; j < units.size(); ++j) {
        if (j == i) continue;
        if (prev_kept != none) {
            // the separator that originally followed the previous kept unit
            std::size_t sep_start = units[prev_kept].span.end;
            std::size_t sep_end = units[prev_kept + 1].span.start;
            variant.text.append(source.substr(sep_start, sep_end - sep_start));
        }
        variant.text.append(units[j].text);
        prev_kept = j;
    }
    return variant;
}

bool diagnosis_matches(std::string_view predicted, std::string_view reference, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        raise(Errc::ConfigError, "diagnosis_matches: threshold must be in (0,1]");
    auto pred = extract_mentions(predicted);
    auto ref = extract_mentions(reference);
    for (const auto& p : pred)
        for (const auto& r : ref)
            if (similarity(p, r) >= threshold) return true;
    return false;
}

namespace {

bool probe_knowledge(const KnowledgeIndex& kb, const std::string& query,
                     std::span<const std::string> reference_mentions, std::size_t top_m,
                     double threshold) {
    std::vector<ChunkHit> hits;
    try {
        hits = kb.search(query, top_m);
    } catch (const Error& e) {
        if (e.code() != Errc::EmptyQuery) throw;
        return false; // nothing searchable in this unit
    }
    for (const auto& hit : hits) {
        const KnowledgeDoc* doc = kb.find_doc(hit.doc_id);
        if (doc == nullptr) continue;
        for (const auto& mention : reference_mentions)
            if (similarity(doc->title, mention) >= threshold) return true;
    }
    return false;
}

} // namespace

RecordAnnotation annotate_record(const EmrRecord& record, LlmGateway& gateway,
                                 const KnowledgeIndex& kb, const AnnotateConfig& config,
                                 bool parallel) {
    if (record.reference_diagnosis.empty())
        raise(Errc::DataError, "annotate: record " + record.id + " has no reference diagnosis");

    std::vector<TextUnit> units;
    try {
        units = segment(record.text, config.segmentation);
    } catch (const Error& e) {
        raise(Errc::SegmentationFailure, "annotate: record " + record.id + ": " + e.what());
    }
    if (units.size() < 2)
        raise(Errc::SegmentationFailure,
              "annotate: record " + record.id + " segments into fewer than 2 units");

    auto ask = [&](const std::string& text, const std::string& tag) {
        LlmRequest req;
        req.prompt = render(config.diag_template, {{"patient", text}});
        req.temperature = config.temperature;
        req.max_tokens = config.max_tokens;
        req.tag = tag;
        return gateway.complete(req).text;
    };

    RecordAnnotation result;
    // the strategy-selection call; a failure here fails the record
    result.full_diag = ask(record.text, "diag:full:" + record.id);
    bool full_correct =
        diagnosis_matches(result.full_diag, record.reference_diagnosis, config.match_threshold);
    result.strategy = full_correct ? AnnotationStrategy::S1 : AnnotationStrategy::S2;

    const auto n = static_cast<std::ptrdiff_t>(units.size());
    std::vector<std::optional<AnnotationOutcome>> slots(units.size());
    std::atomic<std::size_t> skipped{0};

    if (full_correct) {
#pragma omp parallel for schedule(dynamic) if (parallel)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            auto u = static_cast<std::size_t>(i);
            AnnotationOutcome out;
            out.record_id = record.id;
            out.unit_index = u;
            out.strategy = AnnotationStrategy::S1;
            out.full_diag = result.full_diag;
            try {
                MaskedVariant variant = mask_unit(record.text, units, u);
                std::string masked_diag =
                    ask(variant.text, "diag:mask" + std::to_string(u) + ":" + record.id);
                bool still_correct = diagnosis_matches(masked_diag, record.reference_diagnosis,
                                                       config.match_threshold);
                out.masked_diag = std::move(masked_diag);
                out.label = still_correct ? 'C' : 'A';
                slots[u] = std::move(out);
            } catch (const Error&) {
                skipped.fetch_add(1);
            }
        }
    } else {
        auto reference_mentions = extract_mentions(record.reference_diagnosis);
#pragma omp parallel for schedule(dynamic) if (parallel)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            auto u = static_cast<std::size_t>(i);
            AnnotationOutcome out;
            out.record_id = record.id;
            out.unit_index = u;
            out.strategy = AnnotationStrategy::S2;
            out.full_diag = result.full_diag;
            bool hit = probe_knowledge(kb, units[u].text, reference_mentions, config.top_m,
                                       config.match_threshold);
            out.probe_hit = hit;
            out.label = hit ? 'B' : 'C';
            slots[u] = std::move(out);
        }
    }

    for (auto& slot : slots)
        if (slot) result.outcomes.push_back(std::move(*slot));
    result.skipped = skipped.load();
    return result;
}

} // namespace arag
