#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

#include <arag/annotate.hpp>
#include <arag/errors.hpp>
#include <arag/text.hpp>

#include <memory>

using namespace arag;

namespace {

const char* kRecordText =
    "Fever for three days. Dry cough at night. Mild headache today. No appetite loss.";

EmrRecord fixture_record() { return {"r1", kRecordText, "influenza"}; }

KnowledgeIndex fixture_kb() {
    // d1's body shares terms only with the record's second unit
    std::vector<KnowledgeDoc> docs = {
        {"d1", "influenza", "Nocturnal dry cough with chills. Viral in winter."},
        {"d2", "appendicitis", "Abdominal tenderness. Guarding. Rebound on palpation."},
        {"d3", "gastritis", "Epigastric burning. Worse when hungry. Antacids relieve it."},
    };
    IndexConfig config;
    config.max_chunk_chars = 64;
    return KnowledgeIndex::build(std::move(docs), config);
}

std::string labels_of(const RecordAnnotation& ann) {
    std::string s;
    for (const auto& o : ann.outcomes) s.push_back(o.label);
    return s;
}

} // namespace

TEST_CASE("masking drops exactly one unit and keeps separators") {
    std::string text = "First one. Second one. Third one.";
    auto units = segment(text, SegmentationConfig::defaults());
    REQUIRE(units.size() == 3);
    auto variant = mask_unit(text, units, 1);
    CHECK(variant.text == "First one. Third one.");
    CHECK(variant.masked_index == 1);

    auto edge = mask_unit(text, units, 0);
    CHECK(edge.text == "Second one. Third one.");
    auto last = mask_unit(text, units, 2);
    CHECK(last.text == "First one. Second one.");
}

TEST_CASE("mask bounds and degenerate record") {
    std::string text = "Only sentence.";
    auto units = segment(text, SegmentationConfig::defaults());
    try {
        mask_unit(text, units, 0);
        FAIL("expected TooFewUnits");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::TooFewUnits);
    }

    std::string two = "One. Two.";
    auto units2 = segment(two, SegmentationConfig::defaults());
    try {
        mask_unit(two, units2, 2);
        FAIL("expected IndexOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::IndexOutOfRange);
    }
}

TEST_CASE("diagnosis matching uses extracted mentions and fuzzy similarity") {
    CHECK(diagnosis_matches("acute appendicitis", "acute appendicitis", 0.5));
    CHECK(diagnosis_matches("Diagnosis: type 2 diabetes mellitus", "type 2 diabetes", 0.5));

    // oracle check: these two mentions sit below the 0.5 bar
    CHECK(oracles::similarity_ref(utf8::to_codepoints("lobar pneumonia"),
                                  utf8::to_codepoints("acute appendicitis")) < 0.5);
    CHECK_FALSE(diagnosis_matches("lobar pneumonia", "acute appendicitis", 0.5));
}

TEST_CASE("strategy 1 labels the load-bearing unit A") {
    // any prompt containing the second unit diagnoses correctly; the masked
    // variant without it goes wrong
    auto mock = std::make_shared<MockLlmClient>(
        std::vector<MockRule>{{"Dry cough at night", "Diagnosis: influenza"}},
        "Diagnosis: common cold");
    LlmGateway gateway(mock, 4);
    auto kb = fixture_kb();

    auto ann = annotate_record(fixture_record(), gateway, kb, AnnotateConfig{});
    CHECK(ann.strategy == AnnotationStrategy::S1);
    CHECK(labels_of(ann) == "CACC");
    CHECK(mock->calls() == 5); // 1 full + n masked
    CHECK(ann.skipped == 0);
    for (const auto& o : ann.outcomes) {
        CHECK(o.strategy == AnnotationStrategy::S1);
        CHECK(o.masked_diag.has_value());
        CHECK_FALSE(o.probe_hit.has_value());
        CHECK((o.label == 'A' || o.label == 'C'));
    }
}

TEST_CASE("strategy 1 with no critical unit labels everything C") {
    auto mock = std::make_shared<MockLlmClient>(std::vector<MockRule>{}, "Diagnosis: influenza");
    LlmGateway gateway(mock, 4);
    auto kb = fixture_kb();
    auto ann = annotate_record(fixture_record(), gateway, kb, AnnotateConfig{});
    CHECK(ann.strategy == AnnotationStrategy::S1);
    CHECK(labels_of(ann) == "CCCC");
}

TEST_CASE("strategy 2 labels the probe-hitting unit B with a single LLM call") {
    auto mock = std::make_shared<MockLlmClient>(std::vector<MockRule>{}, "Diagnosis: unclear");
    LlmGateway gateway(mock, 4);
    auto kb = fixture_kb();

    auto ann = annotate_record(fixture_record(), gateway, kb, AnnotateConfig{});
    CHECK(ann.strategy == AnnotationStrategy::S2);
    CHECK(labels_of(ann) == "CBCC");
    CHECK(mock->calls() == 1);
    for (const auto& o : ann.outcomes) {
        CHECK(o.strategy == AnnotationStrategy::S2);
        CHECK(o.probe_hit.has_value());
        CHECK_FALSE(o.masked_diag.has_value());
        CHECK((o.label == 'B' || o.label == 'C'));
    }
}

TEST_CASE("annotation is bit-stable across runs") {
    auto kb = fixture_kb();
    auto run = [&] {
        auto mock = std::make_shared<MockLlmClient>(
            std::vector<MockRule>{{"Dry cough at night", "Diagnosis: influenza"}},
            "Diagnosis: common cold");
        LlmGateway gateway(mock, 4);
        return annotate_record(fixture_record(), gateway, kb, AnnotateConfig{});
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.outcomes.size() == b.outcomes.size());
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        CHECK(a.outcomes[i].unit_index == b.outcomes[i].unit_index);
        CHECK(a.outcomes[i].label == b.outcomes[i].label);
        CHECK(a.outcomes[i].full_diag == b.outcomes[i].full_diag);
        CHECK(a.outcomes[i].masked_diag == b.outcomes[i].masked_diag);
    }
}

TEST_CASE("gateway failure on a masked call skips just that unit") {
    // no default: the masked variant without the second unit has no matching rule
    auto mock = std::make_shared<MockLlmClient>(
        std::vector<MockRule>{{"Dry cough at night", "Diagnosis: influenza"}});
    LlmGateway gateway(mock, 4);
    auto kb = fixture_kb();

    auto ann = annotate_record(fixture_record(), gateway, kb, AnnotateConfig{});
    CHECK(ann.strategy == AnnotationStrategy::S1);
    CHECK(ann.skipped == 1);
    REQUIRE(ann.outcomes.size() == 3);
    for (const auto& o : ann.outcomes) {
        CHECK(o.unit_index != 1); // the failed unit is absent
        CHECK(o.label == 'C');
    }
}

TEST_CASE("a record that cannot be segmented into two units fails loudly") {
    auto mock = std::make_shared<MockLlmClient>(std::vector<MockRule>{}, "Diagnosis: x");
    LlmGateway gateway(mock, 4);
    auto kb = fixture_kb();
    EmrRecord record{"r2", "Single sentence only.", "influenza"};
    try {
        annotate_record(record, gateway, kb, AnnotateConfig{});
        FAIL("expected SegmentationFailure");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SegmentationFailure);
    }
}

TEST_CASE("units outside the knowledge vocabulary stay C under strategy 2") {
    auto mock = std::make_shared<MockLlmClient>(std::vector<MockRule>{}, "Diagnosis: unclear");
    LlmGateway gateway(mock, 4);
    auto kb = fixture_kb();
    EmrRecord record{"r3", "Zzz qqq www. Yyy xxx vvv.", "influenza"};
    auto ann = annotate_record(record, gateway, kb, AnnotateConfig{});
    CHECK(labels_of(ann) == "CC");
}
