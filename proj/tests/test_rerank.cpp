#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

#include <arag/rerank.hpp>

#include <algorithm>
#include <random>
#include <set>

using namespace arag;

namespace {

LabeledUnit labeled_unit(std::size_t index, std::string text, UnitLabel label) {
    LabeledUnit lu;
    lu.unit.index = index;
    lu.unit.text = std::move(text);
    lu.label = label;
    lu.scores = {label == UnitLabel::A ? 1.0 : 0.0, label == UnitLabel::B ? 1.0 : 0.0,
                 label == UnitLabel::C ? 1.0 : 0.0};
    return lu;
}

ChunkHit hit(std::string chunk, std::string doc, double score) {
    return {std::move(chunk), std::move(doc), score, 0};
}

KnowledgeIndex toy_kb() {
    std::vector<KnowledgeDoc> docs = {
        {"d1", "influenza", "Fever and chills. Dry cough at night. Muscle aches all over."},
        {"d2", "appendicitis", "Abdominal pain. Nausea and vomiting. Guarding on exam."},
        {"d3", "migraine", "Severe headache. Photophobia. Nausea sometimes."},
    };
    IndexConfig config;
    config.max_chunk_chars = 32;
    return KnowledgeIndex::build(std::move(docs), config);
}

std::vector<oracles::HitRef> to_refs(const std::vector<ChunkHit>& hits) {
    std::vector<oracles::HitRef> refs;
    for (const auto& h : hits) refs.push_back({h.chunk_id, h.doc_id, h.score});
    return refs;
}

} // namespace

TEST_CASE("label filter keeps A and B units in order") {
    std::vector<LabeledUnit> labeled = {
        labeled_unit(0, "a", UnitLabel::A),
        labeled_unit(1, "b", UnitLabel::C),
        labeled_unit(2, "c", UnitLabel::B),
        labeled_unit(3, "d", UnitLabel::C),
    };
    auto sel = select_queries(labeled);
    CHECK_FALSE(sel.fallback);
    REQUIRE(sel.queries.size() == 2);
    CHECK(sel.unit_indices == std::vector<std::size_t>{0, 2});
    CHECK(sel.queries[0].text == "a");
    CHECK(sel.queries[1].text == "c");
}

TEST_CASE("all-C record falls back to every unit with the flag set") {
    std::vector<LabeledUnit> labeled = {
        labeled_unit(0, "a", UnitLabel::C),
        labeled_unit(1, "b", UnitLabel::C),
    };
    auto sel = select_queries(labeled);
    CHECK(sel.fallback);
    REQUIRE(sel.queries.size() == 2);
    CHECK(sel.unit_indices == std::vector<std::size_t>{0, 1});
}

TEST_CASE("all-A record selects everything without fallback") {
    std::vector<LabeledUnit> labeled = {
        labeled_unit(0, "a", UnitLabel::A),
        labeled_unit(1, "b", UnitLabel::A),
    };
    auto sel = select_queries(labeled);
    CHECK_FALSE(sel.fallback);
    CHECK(sel.queries.size() == 2);
}

TEST_CASE("two queries hitting the same chunk merge to one hit") {
    auto kb = toy_kb();
    std::vector<TextUnit> queries = {{0, "nausea and vomiting", {}}, {1, "nausea on exam", {}}};
    auto merged = gather(queries, kb, 1);
    std::set<std::string> ids;
    for (const auto& h : merged) ids.insert(h.chunk_id);
    CHECK(ids.size() == merged.size()); // no duplicate chunk ids
}

TEST_CASE("merged set equals the brute-force per-query union") {
    auto kb = toy_kb();
    std::vector<TextUnit> queries = {
        {0, "fever chills cough", {}},
        {1, "abdominal pain vomiting", {}},
        {2, "headache photophobia", {}},
    };
    const std::size_t m = 3;
    auto merged = gather(queries, kb, m);

    // oracle: run each query alone, union by chunk_id keeping max score
    std::map<std::string, double> expected;
    for (const auto& q : queries)
        for (const auto& h : kb.search(q.text, m)) {
            auto [it, inserted] = expected.try_emplace(h.chunk_id, h.score);
            if (!inserted) it->second = std::max(it->second, h.score);
        }

    REQUIRE(merged.size() == expected.size());
    for (const auto& h : merged) {
        REQUIRE(expected.count(h.chunk_id) == 1);
        CHECK(h.score == expected[h.chunk_id]);
    }
}

TEST_CASE("queries that tokenize to nothing are skipped") {
    auto kb = toy_kb();
    std::vector<TextUnit> queries = {{0, "fever", {}}, {1, "...", {}}};
    auto merged = gather(queries, kb, 3);
    CHECK(!merged.empty());
}

TEST_CASE("adding a query never removes chunks from the merge") {
    auto kb = toy_kb();
    std::vector<TextUnit> queries = {{0, "fever cough", {}}, {1, "abdominal pain", {}}};
    auto before = gather(queries, kb, 3);
    queries.push_back({2, "severe headache", {}});
    auto after = gather(queries, kb, 3);

    std::set<std::string> before_ids, after_ids;
    for (const auto& h : before) before_ids.insert(h.chunk_id);
    for (const auto& h : after) after_ids.insert(h.chunk_id);
    CHECK(std::includes(after_ids.begin(), after_ids.end(), before_ids.begin(), before_ids.end()));
}

TEST_CASE("chunk counts drive the document order") {
    std::vector<ChunkHit> hits = {hit("c1", "d1", 1.0), hit("c2", "d1", 0.5), hit("c3", "d2", 9.0)};
    auto docs = score_docs(hits);
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].doc_id == "d1");
    CHECK(docs[0].chunk_count == 2);
    CHECK(docs[1].doc_id == "d2");
    CHECK(docs[1].chunk_count == 1);
    CHECK(rerank_docs(hits, 2) == std::vector<std::string>{"d1", "d2"});
}

TEST_CASE("equal counts fall back to best chunk score") {
    std::vector<ChunkHit> hits = {hit("c1", "d1", 3.2), hit("c2", "d2", 1.1)};
    CHECK(rerank_docs(hits, 2) == std::vector<std::string>{"d1", "d2"});
    std::vector<ChunkHit> flipped = {hit("c1", "d1", 1.1), hit("c2", "d2", 3.2)};
    CHECK(rerank_docs(flipped, 2) == std::vector<std::string>{"d2", "d1"});
}

TEST_CASE("empty hit set gives an empty ranking") {
    CHECK(rerank_docs({}, 3).empty());
}

TEST_CASE("truncation to k") {
    std::vector<ChunkHit> hits = {hit("c1", "d1", 1.0), hit("c2", "d2", 1.0), hit("c3", "d3", 1.0)};
    CHECK(rerank_docs(hits, 2).size() == 2);
}

TEST_CASE("200 randomized hit sets match the brute-force oracle exactly") {
    std::mt19937 rng(314159);
    // coarse score grid forces plenty of ties in both count and score
    const double score_grid[] = {1.0, 2.0, 3.0, 4.0};
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n_hits = rng() % 201;
        std::size_t n_docs = 1 + rng() % 40;
        std::vector<ChunkHit> hits;
        for (std::size_t i = 0; i < n_hits; ++i) {
            std::string doc = "doc" + std::to_string(rng() % n_docs);
            hits.push_back(hit("chunk" + std::to_string(i), doc, score_grid[rng() % 4]));
        }
        std::size_t k = 1 + rng() % 10;
        auto got = rerank_docs(hits, k);
        auto expected = oracles::rerank_ref(to_refs(hits), k);
        CHECK(got == expected);
    }
}

TEST_CASE("insertion order never changes the ranking") {
    std::mt19937 rng(99);
    std::vector<ChunkHit> hits;
    for (int i = 0; i < 50; ++i)
        hits.push_back(hit("c" + std::to_string(i), "d" + std::to_string(rng() % 8),
                           static_cast<double>(1 + rng() % 3)));
    auto baseline = rerank_docs(hits, 5);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(hits.begin(), hits.end(), rng);
        CHECK(rerank_docs(hits, 5) == baseline);
    }
}

TEST_CASE("best-score ranking is the ablation order") {
    std::vector<ChunkHit> hits = {hit("c1", "d1", 1.0), hit("c2", "d1", 1.5), hit("c3", "d2", 9.0)};
    CHECK(rerank_docs(hits, 2) == std::vector<std::string>{"d1", "d2"});
    CHECK(rank_docs_by_best_score(hits, 2) == std::vector<std::string>{"d2", "d1"});
}
