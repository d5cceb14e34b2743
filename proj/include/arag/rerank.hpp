#pragma once

#include "arag/classifier.hpp"
#include "arag/index.hpp"

#include <span>
#include <string>
#include <vector>

namespace arag {

// Per-document rerank signal: how many distinct retrieved chunks belong to
// the document, with the best BM25 score among them as the tie-breaker.
struct DocScore {
    std::string doc_id;
    std::size_t chunk_count = 0;
    double best_chunk_score = 0.0;
};

struct QuerySelection {
    std::vector<TextUnit> queries;
    std::vector<std::size_t> unit_indices;
    bool fallback = false; // set when no A/B unit existed and all units were taken
};

// Keeps label-A and label-B units in original order; an all-C record falls
// back to every unit (retrieval was already demanded) with the flag set.
QuerySelection select_queries(std::span<const LabeledUnit> labeled);

// Union of per-query top-m hits, de-duplicated by chunk_id keeping the
// highest score (earliest query on exact ties). Queries that tokenize to
// nothing contribute no hits. Searches run in parallel when requested; the
// merge is serial in query order either way.
std::vector<ChunkHit> gather(std::span<const TextUnit> queries, const KnowledgeIndex& index,
                             std::size_t m, bool parallel = true);

// Documents ordered by chunk_count desc, best_chunk_score desc, doc_id asc.
std::vector<DocScore> score_docs(std::span<const ChunkHit> hits);
std::vector<std::string> rerank_docs(std::span<const ChunkHit> hits, std::size_t k);

// Ablation variant: order documents by best chunk score alone (doc_id breaks
// exact ties).
std::vector<std::string> rank_docs_by_best_score(std::span<const ChunkHit> hits, std::size_t k);

} // namespace arag
