#pragma once

#include "arag/io.hpp"
#include "arag/text.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace arag {

// Length-bounded, sentence-aligned slice of a knowledge document.
struct Chunk {
    std::string chunk_id; // "<doc_id>#<ordinal>"
    std::string doc_id;
    std::string text;
    std::uint32_t first_sentence = 0;
    std::uint32_t last_sentence = 0; // inclusive
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    void validate() const;
};

struct TokenizerConfig {
    bool lowercase = true;
};

// Whitespace/punctuation split for Latin runs plus character bigrams for CJK
// runs. Single-ideograph runs emit the lone character so they stay searchable.
std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config = {});

// Greedy packing: sentences are appended while the chunk stays within
// max_chunk_chars (code points); an over-long single sentence is hard-split.
std::vector<Chunk> chunk_document(const KnowledgeDoc& doc, std::size_t max_chunk_chars,
                                  const SegmentationConfig& seg = SegmentationConfig::defaults());

struct ChunkHit {
    std::string chunk_id;
    std::string doc_id;
    double score = 0.0;
    std::size_t query_index = 0; // which query sentence produced it (trace only)
};

// BM25 inverted index over chunks. Immutable after build; concurrent searches
// are safe.
class InvertedIndex {
public:
    static InvertedIndex build(std::vector<Chunk> chunks, Bm25Params params,
                               TokenizerConfig tokenizer = {});

    // Top-m chunks by BM25 with +1-smoothed idf:
    //   score = sum_t idf(t) * tf*(k1+1) / (tf + k1*(1-b+b*len/avg_len))
    //   idf(t) = ln((N - df + 0.5)/(df + 0.5) + 1)
    // Zero-score chunks are excluded; ties break by chunk_id ascending.
    // Throws EmptyQuery when the query tokenizes to nothing.
    std::vector<ChunkHit> search(std::string_view query, std::size_t m) const;

    const std::vector<Chunk>& chunks() const { return chunks_; }
    std::size_t doc_freq(std::string_view term) const;
    double avg_len() const { return avg_len_; }
    const Bm25Params& params() const { return params_; }
    std::uint32_t chunk_tokens(std::size_t ord) const { return lengths_[ord]; }

    void save_into(class BinaryWriter& w) const;
    static InvertedIndex load_from(class BinaryReader& r);

private:
    std::vector<Chunk> chunks_;
    std::vector<std::uint32_t> lengths_;                  // tokens per chunk
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> postings_; // (chunk ord, tf)
    double avg_len_ = 0.0;
    Bm25Params params_;
    TokenizerConfig tokenizer_;
};

struct IndexConfig {
    std::size_t max_chunk_chars = 256;
    bool whole_doc_chunks = false; // ablation: one chunk per document
    Bm25Params bm25;
    SegmentationConfig segmentation = SegmentationConfig::defaults();
};

// Self-contained retrieval unit: the documents plus the chunk-level index.
// One file on disk serves the whole pipeline.
class KnowledgeIndex {
public:
    static KnowledgeIndex build(std::vector<KnowledgeDoc> docs, const IndexConfig& config);

    std::vector<ChunkHit> search(std::string_view query, std::size_t m) const {
        return index_.search(query, m);
    }
    const KnowledgeDoc* find_doc(std::string_view doc_id) const;
    const std::vector<KnowledgeDoc>& docs() const { return docs_; }
    const InvertedIndex& index() const { return index_; }

    void save(const std::string& path) const;
    static KnowledgeIndex load(const std::string& path);

private:
    std::vector<KnowledgeDoc> docs_;
    InvertedIndex index_;
};

} // namespace arag
