#include "arag/rerank.hpp"

#include "arag/errors.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace arag {

QuerySelection select_queries(std::span<const LabeledUnit> labeled) {
    if (labeled.empty()) raise(Errc::EmptyLabels, "select_queries: no labeled units");
    QuerySelection sel;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        if (labeled[i].label != UnitLabel::C) {
            sel.queries.push_back(labeled[i].unit);
            sel.unit_indices.push_back(i);
        }
    }
    if (sel.queries.empty()) {
        sel.fallback = true;
        for (std::size_t i = 0; i < labeled.size(); ++i) {
            sel.queries.push_back(labeled[i].unit);
            sel.unit_indices.push_back(i);
        }
    }
    return sel;
}

std::vector<ChunkHit> gather(std::span<const TextUnit> queries, const KnowledgeIndex& index,
                             std::size_t m, bool parallel) {
    std::vector<std::vector<ChunkHit>> per_query(queries.size());
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t qi = 0; qi < n; ++qi) {
        auto u = static_cast<std::size_t>(qi);
        try {
            per_query[u] = index.search(queries[u].text, m);
        } catch (const Error& e) {
            if (e.code() != Errc::EmptyQuery) throw;
            // nothing to search for in this unit
        }
        for (auto& hit : per_query[u]) hit.query_index = u;
    }

    std::vector<ChunkHit> merged;
    std::unordered_map<std::string, std::size_t> by_chunk;
    for (std::size_t qi = 0; qi < per_query.size(); ++qi) {
        for (auto& hit : per_query[qi]) {
            auto [it, inserted] = by_chunk.try_emplace(hit.chunk_id, merged.size());
            if (inserted) {
                merged.push_back(std::move(hit));
            } else if (hit.score > merged[it->second].score) {
                merged[it->second] = std::move(hit);
            }
        }
    }
    return merged;
}

std::vector<DocScore> score_docs(std::span<const ChunkHit> hits) {
    // std::map keys sorted by doc_id: tie order falls out of the sort below
    std::map<std::string, DocScore> by_doc;
    for (const auto& hit : hits) {
        DocScore& d = by_doc[hit.doc_id];
        if (d.doc_id.empty()) d.doc_id = hit.doc_id;
        d.chunk_count += 1;
        d.best_chunk_score = std::max(d.best_chunk_score, hit.score);
    }

    std::vector<DocScore> docs;
    docs.reserve(by_doc.size());
    for (auto& [id, d] : by_doc) docs.push_back(std::move(d));
    std::stable_sort(docs.begin(), docs.end(), [](const DocScore& a, const DocScore& b) {
        if (a.chunk_count != b.chunk_count) return a.chunk_count > b.chunk_count;
        if (a.best_chunk_score != b.best_chunk_score) return a.best_chunk_score > b.best_chunk_score;
        return a.doc_id < b.doc_id;
    });
    return docs;
}

std::vector<std::string> rerank_docs(std::span<const ChunkHit> hits, std::size_t k) {
    if (k < 1) raise(Errc::ConfigError, "rerank: k must be >= 1");
    auto docs = score_docs(hits);
    if (docs.size() > k) docs.resize(k);
    std::vector<std::string> ids;
    ids.reserve(docs.size());
    for (auto& d : docs) ids.push_back(std::move(d.doc_id));
    return ids;
}

std::vector<std::string> rank_docs_by_best_score(std::span<const ChunkHit> hits, std::size_t k) {
    if (k < 1) raise(Errc::ConfigError, "rerank: k must be >= 1");
    auto docs = score_docs(hits);
    std::stable_sort(docs.begin(), docs.end(), [](const DocScore& a, const DocScore& b) {
        if (a.best_chunk_score != b.best_chunk_score) return a.best_chunk_score > b.best_chunk_score;
        return a.doc_id < b.doc_id;
    });
    if (docs.size() > k) docs.resize(k);
    std::vector<std::string> ids;
    ids.reserve(docs.size());
    for (auto& d : docs) ids.push_back(std::move(d.doc_id));
    return ids;
}

} // namespace arag
