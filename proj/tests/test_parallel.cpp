// The OpenMP kernels must be drop-in equivalent to their serial reference
// paths: identical bits out, parallelism only changes wall time.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arag/annotate.hpp>
#include <arag/filter.hpp>
#include <arag/pipeline.hpp>
#include <arag/rerank.hpp>

#include <memory>

using namespace arag;
using nlohmann::json;

namespace {

std::vector<TrainingExample> corpus() {
    const char* markers[3] = {"redflagsign", "usefulhint", "routinenote"};
    std::vector<TrainingExample> out;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 50; ++i)
            out.push_back({"case " + std::to_string(i) + " " + markers[c],
                           static_cast<UnitLabel>(c)});
    return out;
}

KnowledgeIndex kb() {
    std::vector<KnowledgeDoc> docs = {
        {"d1", "influenza", "Fever and chills. Dry cough at night. Muscle aches."},
        {"d2", "appendicitis", "Abdominal pain. Nausea and vomiting. Guarding."},
        {"d3", "migraine", "Severe headache. Photophobia. Aura before onset."},
    };
    IndexConfig config;
    config.max_chunk_chars = 40;
    return KnowledgeIndex::build(std::move(docs), config);
}

} // namespace

TEST_CASE("training: parallel score pass equals serial bit-for-bit") {
    FeatureSpace space;
    space.dim = 1u << 12;
    TrainHyper hyper;
    hyper.epochs = 5;
    auto serial = LinearClassifier::train(corpus(), space, hyper, /*parallel=*/false);
    auto parallel = LinearClassifier::train(corpus(), space, hyper, /*parallel=*/true);
    REQUIRE(serial.params().size() == parallel.params().size());
    for (std::size_t i = 0; i < serial.params().size(); ++i)
        CHECK(serial.params()[i] == parallel.params()[i]);
}

TEST_CASE("batch prediction: parallel equals serial") {
    FeatureSpace space;
    space.dim = 1u << 12;
    auto model = LinearClassifier::train(corpus(), space, TrainHyper{});
    std::vector<TextUnit> units;
    for (int i = 0; i < 64; ++i) {
        TextUnit u;
        u.index = static_cast<std::size_t>(i);
        u.text = "unit " + std::to_string(i) + (i % 3 == 0 ? " redflagsign" : " routinenote");
        units.push_back(std::move(u));
    }
    auto a = model.predict_batch(units, /*parallel=*/false);
    auto b = model.predict_batch(units, /*parallel=*/true);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].label == b[i].label);
        for (std::size_t c = 0; c < 3; ++c) CHECK(a[i].scores[c] == b[i].scores[c]);
    }
}

TEST_CASE("gather: parallel equals serial") {
    auto index = kb();
    std::vector<TextUnit> queries;
    const char* texts[] = {"fever cough", "abdominal pain", "headache aura", "nausea vomiting",
                           "chills aches"};
    for (std::size_t i = 0; i < 5; ++i) queries.push_back({i, texts[i], {}});

    auto a = gather(queries, index, 3, /*parallel=*/false);
    auto b = gather(queries, index, 3, /*parallel=*/true);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].chunk_id == b[i].chunk_id);
        CHECK(a[i].score == b[i].score);
        CHECK(a[i].query_index == b[i].query_index);
    }
}

TEST_CASE("filter: parallel equals serial") {
    auto index = kb();
    auto run = [&](bool parallel) {
        auto mock = std::make_shared<MockLlmClient>(
            std::vector<MockRule>{{"appendicitis", "EXCLUDE"}}, "SUPPORT");
        LlmGateway gateway(mock, 4);
        return filter_docs("patient with fever", index.docs(), gateway,
                           PromptTemplate::builtin(TemplateKind::Diff), parallel);
    };
    auto a = run(false);
    auto b = run(true);
    REQUIRE(a.kept.size() == b.kept.size());
    for (std::size_t i = 0; i < a.kept.size(); ++i) CHECK(a.kept[i].doc_id == b.kept[i].doc_id);
    REQUIRE(a.verdicts.size() == b.verdicts.size());
    for (std::size_t i = 0; i < a.verdicts.size(); ++i) {
        CHECK(a.verdicts[i].support == b.verdicts[i].support);
        CHECK(a.verdicts[i].raw_output == b.verdicts[i].raw_output);
    }
}

TEST_CASE("annotation: parallel equals serial") {
    auto index = kb();
    EmrRecord record{"r1", "Fever for three days. Dry cough at night. No appetite loss.",
                     "influenza"};
    auto run = [&](bool parallel) {
        auto mock = std::make_shared<MockLlmClient>(
            std::vector<MockRule>{{"Dry cough at night", "Diagnosis: influenza"}},
            "Diagnosis: common cold");
        LlmGateway gateway(mock, 4);
        return annotate_record(record, gateway, index, AnnotateConfig{}, parallel);
    };
    auto a = run(false);
    auto b = run(true);
    REQUIRE(a.outcomes.size() == b.outcomes.size());
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        CHECK(a.outcomes[i].unit_index == b.outcomes[i].unit_index);
        CHECK(a.outcomes[i].label == b.outcomes[i].label);
        CHECK(a.outcomes[i].masked_diag == b.outcomes[i].masked_diag);
    }
}

TEST_CASE("run_batch: parallel equals serial") {
    FeatureSpace space;
    space.dim = 1u << 12;
    auto model = std::make_shared<LinearClassifier>(
        LinearClassifier::train(corpus(), space, TrainHyper{}));
    auto index = std::make_shared<KnowledgeIndex>(kb());

    auto run = [&](bool parallel) {
        auto mock = std::make_shared<MockLlmClient>(
            std::vector<MockRule>{{"differential diagnosis check", "SUPPORT"}},
            "Diagnosis: fixture");
        auto gateway = std::make_shared<LlmGateway>(mock, 4);
        Pipeline pipeline(PipelineConfig{}, model, index, gateway);
        std::vector<EmrRecord> records;
        for (int i = 0; i < 12; ++i)
            records.push_back({"r" + std::to_string(i),
                               i % 2 == 0 ? "All redflagsign here. Again redflagsign now."
                                          : "Fever routinenote noted. Cough routinenote found.",
                               ""});
        auto [outcomes, summary] = pipeline.run_batch(records, RoutePolicy::Adaptive, parallel);
        json dump = json::array();
        for (const auto& o : outcomes) dump.push_back(o.to_json());
        return dump.dump();
    };
    CHECK(run(false) == run(true));
}
