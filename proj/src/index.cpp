#include "arag/index.hpp"

#include "arag/errors.hpp"
#include "arag/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace arag {

void Bm25Params::validate() const {
    if (!(k1 > 0.0)) raise(Errc::ConfigError, "bm25: k1 must be > 0");
    if (!(b >= 0.0 && b <= 1.0)) raise(Errc::ConfigError, "bm25: b must be in [0,1]");
}

namespace {

bool is_word_cp(char32_t cp) {
    if (cp < 0x80) return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    if (utf8::is_space(cp) || utf8::is_cjk(cp)) return false;
    // punctuation blocks commonly found in clinical text
    if (cp >= 0x2000 && cp <= 0x206F) return false;
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    if ((cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
        (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65))
        return false;
    return true;
}

void append_cp(char32_t cp, bool lowercase, std::string& out) {
    if (lowercase && cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
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

std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config) {
    std::vector<std::string> tokens;
    std::u32string cps = utf8::to_codepoints(text);

    std::string word;
    std::u32string cjk_run;

    auto flush_word = [&] {
        if (!word.empty()) tokens.push_back(word);
        word.clear();
    };
    auto flush_cjk = [&] {
        if (cjk_run.empty()) return;
        if (cjk_run.size() == 1) {
            std::string t;
            append_cp(cjk_run[0], false, t);
            tokens.push_back(std::move(t));
        } else {
            for (std::size_t i = 0; i + 1 < cjk_run.size(); ++i) {
                std::string t;
                append_cp(cjk_run[i], false, t);
                append_cp(cjk_run[i + 1], false, t);
                tokens.push_back(std::move(t));
            }
        }
        cjk_run.clear();
    };

    for (char32_t cp : cps) {
        if (utf8::is_cjk(cp)) {
            flush_word();
            cjk_run.push_back(cp);
        } else if (is_word_cp(cp)) {
            flush_cjk();
            append_cp(cp, config.lowercase, word);
        } else {
            flush_word();
            flush_cjk();
        }
    }
    flush_word();
    flush_cjk();
    return tokens;
}

std::vector<Chunk> chunk_document(const KnowledgeDoc& doc, std::size_t max_chunk_chars,
                                  const SegmentationConfig& seg) {
    if (max_chunk_chars < 32) raise(Errc::ConfigError, "chunking: max_chunk_chars must be >= 32");
    if (doc.doc_id.empty()) raise(Errc::DataError, "chunking: document has no doc_id");

    std::vector<TextUnit> units = segment(doc.body, seg);
    std::vector<Chunk> chunks;

    auto emit = [&](std::string text, std::uint32_t first, std::uint32_t last) {
        Chunk c;
        c.chunk_id = doc.doc_id + "#" + std::to_string(chunks.size());
        c.doc_id = doc.doc_id;
        c.text = std::move(text);
        c.first_sentence = first;
        c.last_sentence = last;
        chunks.push_back(std::move(c));
    };

    bool open = false;
    std::size_t start_byte = 0;
    std::uint32_t first = 0, last = 0;

    auto flush = [&](std::size_t end_byte) {
        if (!open) return;
        emit(std::string(doc.body.substr(start_byte, end_byte - start_byte)), first, last);
        open = false;
    };

    std::size_t open_end = 0;
    for (std::size_t i = 0; i < units.size(); ++i) {
        const TextUnit& u = units[i];
        std::size_t u_len = utf8::length(u.text);

        if (u_len > max_chunk_chars) {
            // over-long single sentence: hard split into its own chunks
            flush(open_end);
            std::u32string cps = utf8::to_codepoints(u.text);
            for (std::size_t off = 0; off < cps.size(); off += max_chunk_chars) {
                std::size_t n = std::min(max_chunk_chars, cps.size() - off);
                std::string piece;
                for (std::size_t j = 0; j < n; ++j) append_cp(cps[off + j], false, piece);
                emit(std::move(piece), static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i));
            }
            continue;
        }

        if (!open) {
            open = true;
            start_byte = u.span.start;
            open_end = u.span.end;
            first = last = static_cast<std::uint32_t>(i);
            continue;
        }

        std::string_view candidate =
            std::string_view(doc.body).substr(start_byte, u.span.end - start_byte);
        if (utf8::length(candidate) <= max_chunk_chars) {
            last = static_cast<std::uint32_t>(i);
            open_end = u.span.end;
        } else {
            flush(open_end);
            open = true;
            start_byte = u.span.start;
            open_end = u.span.end;
            first = last = static_cast<std::uint32_t>(i);
        }
    }
    flush(open_end);
    return chunks;
}

InvertedIndex InvertedIndex::build(std::vector<Chunk> chunks, Bm25Params params,
                                   TokenizerConfig tokenizer) {
    params.validate();
    if (chunks.empty()) raise(Errc::EmptyCorpus, "build_index: no chunks");

    InvertedIndex idx;
    idx.params_ = params;
    idx.tokenizer_ = tokenizer;
    idx.chunks_ = std::move(chunks);
    idx.lengths_.resize(idx.chunks_.size(), 0);

    std::uint64_t total_tokens = 0;
    std::unordered_map<std::uint32_t, std::uint32_t> counts;
    std::vector<std::uint32_t> first_seen;

    for (std::size_t ord = 0; ord < idx.chunks_.size(); ++ord) {
        auto tokens = tokenize(idx.chunks_[ord].text, tokenizer);
        idx.lengths_[ord] = static_cast<std::uint32_t>(tokens.size());
        total_tokens += tokens.size();

        counts.clear();
        first_seen.clear();
        for (auto& t : tokens) {
            auto [it, inserted] = idx.term_ids_.try_emplace(
                std::move(t), static_cast<std::uint32_t>(idx.postings_.size()));
            if (inserted) idx.postings_.emplace_back();
            auto [cit, fresh] = counts.try_emplace(it->second, 0u);
            if (fresh) first_seen.push_back(it->second);
            ++cit->second;
        }
        for (auto id : first_seen)
            idx.postings_[id].emplace_back(static_cast<std::uint32_t>(ord), counts[id]);
    }

    if (total_tokens == 0)
        raise(Errc::EmptyCorpus, "build_index: corpus tokenizes to nothing");
    idx.avg_len_ = static_cast<double>(total_tokens) / static_cast<double>(idx.chunks_.size());
    return idx;
}

std::size_t InvertedIndex::doc_freq(std::string_view term) const {
    auto it = term_ids_.find(std::string(term));
    return it == term_ids_.end() ? 0 : postings_[it->second].size();
}

std::vector<ChunkHit> InvertedIndex::search(std::string_view query, std::size_t m) const {
    if (m < 1) raise(Errc::ConfigError, "search: m must be >= 1");
    std::vector<std::string> tokens = tokenize(query, tokenizer_);
    if (tokens.empty()) raise(Errc::EmptyQuery, "search: query tokenizes to nothing");

    // query terms contribute once each (set semantics)
    std::vector<std::string> terms;
    {
        std::unordered_set<std::string> seen;
        for (auto& t : tokens)
            if (seen.insert(t).second) terms.push_back(t);
    }

    const double n_chunks = static_cast<double>(chunks_.size());
    std::vector<double> scores(chunks_.size(), 0.0);
    for (const auto& term : terms) {
        auto it = term_ids_.find(term);
        if (it == term_ids_.end()) continue;
        const auto& plist = postings_[it->second];
        const double df = static_cast<double>(plist.size());
        const double idf = std::log((n_chunks - df + 0.5) / (df + 0.5) + 1.0);
        for (const auto& [ord, tf] : plist) {
            const double ftf = static_cast<double>(tf);
            const double norm = params_.k1 * (1.0 - params_.b +
                                              params_.b * static_cast<double>(lengths_[ord]) / avg_len_);
            scores[ord] += idf * (ftf * (params_.k1 + 1.0)) / (ftf + norm);
        }
    }

    std::vector<std::uint32_t> matched;
    for (std::uint32_t ord = 0; ord < scores.size(); ++ord)
        if (scores[ord] > 0.0) matched.push_back(ord);

    std::sort(matched.begin(), matched.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return chunks_[a].chunk_id < chunks_[b].chunk_id;
    });
    if (matched.size() > m) matched.resize(m);

    std::vector<ChunkHit> hits;
    hits.reserve(matched.size());
    for (auto ord : matched)
        hits.push_back({chunks_[ord].chunk_id, chunks_[ord].doc_id, scores[ord], 0});
    return hits;
}

void InvertedIndex::save_into(BinaryWriter& w) const {
    w.f64(params_.k1);
    w.f64(params_.b);
    w.u32(tokenizer_.lowercase ? 1 : 0);
    w.f64(avg_len_);
    w.u64(chunks_.size());
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        const Chunk& c = chunks_[i];
        w.str(c.chunk_id);
        w.str(c.doc_id);
        w.str(c.text);
        w.u32(c.first_sentence);
        w.u32(c.last_sentence);
        w.u32(lengths_[i]);
    }
    // terms ordered by id: deterministic, byte-stable files
    std::vector<const std::string*> terms(term_ids_.size());
    for (const auto& [term, id] : term_ids_) terms[id] = &term;
    w.u64(terms.size());
    for (std::size_t id = 0; id < terms.size(); ++id) {
        w.str(*terms[id]);
        w.u64(postings_[id].size());
        for (const auto& [ord, tf] : postings_[id]) {
            w.u32(ord);
            w.u32(tf);
        }
    }
}

InvertedIndex InvertedIndex::load_from(BinaryReader& r) {
    InvertedIndex idx;
    idx.params_.k1 = r.f64();
    idx.params_.b = r.f64();
    idx.tokenizer_.lowercase = r.u32() != 0;
    idx.avg_len_ = r.f64();
    std::uint64_t n_chunks = r.u64();
    idx.chunks_.resize(n_chunks);
    idx.lengths_.resize(n_chunks);
    for (std::size_t i = 0; i < n_chunks; ++i) {
        Chunk& c = idx.chunks_[i];
        c.chunk_id = r.str();
        c.doc_id = r.str();
        c.text = r.str();
        c.first_sentence = r.u32();
        c.last_sentence = r.u32();
        idx.lengths_[i] = r.u32();
    }
    std::uint64_t n_terms = r.u64();
    idx.postings_.resize(n_terms);
    for (std::uint32_t id = 0; id < n_terms; ++id) {
        std::string term = r.str();
        idx.term_ids_.emplace(std::move(term), id);
        std::uint64_t n_post = r.u64();
        idx.postings_[id].resize(n_post);
        for (auto& [ord, tf] : idx.postings_[id]) {
            ord = r.u32();
            tf = r.u32();
        }
    }
    return idx;
}

KnowledgeIndex KnowledgeIndex::build(std::vector<KnowledgeDoc> docs, const IndexConfig& config) {
    if (docs.empty()) raise(Errc::EmptyCorpus, "index: no documents");

    std::vector<Chunk> chunks;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const KnowledgeDoc& doc = docs[d];
        if (config.whole_doc_chunks) {
            auto units = segment(doc.body, config.segmentation);
            Chunk c;
            c.chunk_id = doc.doc_id + "#0";
            c.doc_id = doc.doc_id;
            c.text = doc.body;
            c.first_sentence = 0;
            c.last_sentence = static_cast<std::uint32_t>(units.size() - 1);
            chunks.push_back(std::move(c));
        } else {
            auto doc_chunks = chunk_document(doc, config.max_chunk_chars, config.segmentation);
            chunks.insert(chunks.end(), std::make_move_iterator(doc_chunks.begin()),
                          std::make_move_iterator(doc_chunks.end()));
        }
    }

    KnowledgeIndex ki;
    ki.docs_ = std::move(docs);
    ki.index_ = InvertedIndex::build(std::move(chunks), config.bm25);
    return ki;
}

const KnowledgeDoc* KnowledgeIndex::find_doc(std::string_view doc_id) const {
    for (const auto& d : docs_)
        if (d.doc_id == doc_id) return &d;
    return nullptr;
}

namespace {
constexpr char kIndexMagic[9] = "ARAGIDX\0";
constexpr std::uint32_t kIndexVersion = 1;
} // namespace

void KnowledgeIndex::save(const std::string& path) const {
    BinaryWriter w(path);
    w.magic(kIndexMagic);
    w.u32(kIndexVersion);
    w.u64(docs_.size());
    for (const auto& d : docs_) {
        w.str(d.doc_id);
        w.str(d.title);
        w.str(d.body);
    }
    index_.save_into(w);
    w.finish(path);
}

KnowledgeIndex KnowledgeIndex::load(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(kIndexMagic);
    r.expect_version(kIndexVersion);
    KnowledgeIndex ki;
    ki.docs_.resize(r.u64());
    for (auto& d : ki.docs_) {
        d.doc_id = r.str();
        d.title = r.str();
        d.body = r.str();
    }
    ki.index_ = InvertedIndex::load_from(r);
    return ki;
}

} // namespace arag
