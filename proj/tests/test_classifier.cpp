#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"

#include <arag/classifier.hpp>
#include <arag/errors.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace arag;

namespace {

TextUnit make_unit(std::string text, std::size_t index = 0) {
    TextUnit u;
    u.index = index;
    u.text = std::move(text);
    return u;
}

// Linearly separable corpus: each label has a marker token plus shared filler.
std::vector<TrainingExample> separable_corpus(std::size_t per_label, std::uint64_t seed) {
    const char* markers[3] = {"redflagsign", "usefulhint", "routinenote"};
    const std::vector<std::string> filler = {"patient", "reports", "since", "morning",
                                             "without", "prior", "history", "stable"};
    std::mt19937_64 rng(seed);
    std::vector<TrainingExample> out;
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < per_label; ++i) {
            std::string text = filler[rng() % filler.size()];
            text += " " + std::string(markers[c]);
            text += " " + filler[rng() % filler.size()];
            out.push_back({text, static_cast<UnitLabel>(c)});
        }
    }
    return out;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("featurize is deterministic") {
    FeatureSpace space;
    space.dim = 1u << 12;
    auto a = featurize("fever for 3 days", space);
    auto b = featurize("fever for 3 days", space);
    REQUIRE(a.items.size() == b.items.size());
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        CHECK(a.items[i].first == b.items[i].first);
        CHECK(a.items[i].second == b.items[i].second);
    }
}

TEST_CASE("char 2-grams of abc hash into the hand-computed buckets") {
    FeatureSpace space;
    space.ngram_orders = {2};
    space.dim = 16;
    space.token_unigrams = false;
    auto v = featurize("abc", space);

    auto b_ab = static_cast<std::uint32_t>(oracles::fnv1a64_ref("cab") % 16);
    auto b_bc = static_cast<std::uint32_t>(oracles::fnv1a64_ref("cbc") % 16);
    std::set<std::uint32_t> expected = {b_ab, b_bc};
    REQUIRE(v.items.size() == expected.size());
    for (const auto& [idx, val] : v.items) CHECK(expected.count(idx) == 1);
    double norm = 0.0;
    for (const auto& [idx, val] : v.items) norm += val * val;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("duplicate concatenation preserves direction") {
    FeatureSpace space;
    space.dim = 1u << 12;
    std::mt19937 rng(11);
    const std::vector<std::string> words = {"fever", "cough", "3mg", "心率", "stable", "x"};
    for (int trial = 0; trial < 50; ++trial) {
        std::string s = words[rng() % words.size()];
        for (int i = 0; i < static_cast<int>(rng() % 4); ++i) s += " " + words[rng() % words.size()];
        auto once = featurize(s, space);
        auto twice = featurize(s + " " + s, space);
        REQUIRE(once.items.size() == twice.items.size());
        for (std::size_t i = 0; i < once.items.size(); ++i) {
            CHECK(once.items[i].first == twice.items[i].first);
            CHECK(once.items[i].second == doctest::Approx(twice.items[i].second).epsilon(1e-12));
        }
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    FeatureSpace space;
    space.dim = 64;
    SoftmaxRegression prob;
    prob.dim = space.dim;
    prob.l2 = 1e-3;
    const char* texts[] = {"fever and chills", "dry cough", "no complaints",
                           "severe pain", "mild rash", "加重的咳嗽"};
    UnitLabel labels[] = {UnitLabel::A, UnitLabel::B, UnitLabel::C,
                          UnitLabel::A, UnitLabel::C, UnitLabel::B};
    for (int i = 0; i < 6; ++i) {
        prob.x.push_back(featurize(texts[i], space));
        prob.y.push_back(labels[i]);
    }

    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss(0.0, 0.5);
    std::vector<double> params(prob.param_count());
    for (auto& p : params) p = gauss(rng);

    std::vector<double> grad(prob.param_count());
    prob.gradient(params, 0, prob.x.size(), grad);

    auto loss_fn = [&](const std::vector<double>& p) { return prob.loss(p, 0, prob.x.size()); };

    // 5 random coordinates, always including a bias and an active weight
    std::vector<std::size_t> coords;
    coords.push_back(prob.param_count() - 1);          // a bias
    coords.push_back(prob.x[0].items.front().first);   // active weight, class A block
    while (coords.size() < 5) coords.push_back(rng() % prob.param_count());

    for (auto coord : coords) {
        double numeric = oracles::central_diff(loss_fn, params, coord, 1e-5);
        double analytic = grad[coord];
        double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
        CHECK(std::abs(numeric - analytic) / denom < 1e-4);
    }
}

TEST_CASE("separable fixture trains to high accuracy") {
    auto corpus = separable_corpus(100, 3);
    FeatureSpace space;
    space.dim = 1u << 12;
    TrainHyper hyper;
    hyper.epochs = 20;
    auto model = LinearClassifier::train(corpus, space, hyper);
    CHECK(model.stats().final_train_accuracy >= 0.95);

    auto unit = make_unit("patient redflagsign stable");
    auto labeled = model.predict(unit);
    CHECK(labeled.label == UnitLabel::A);
    CHECK(labeled.scores[0] > 0.5);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
    auto corpus = separable_corpus(40, 5);
    FeatureSpace space;
    space.dim = 1u << 12;
    TrainHyper hyper;
    hyper.epochs = 5;
    auto m1 = LinearClassifier::train(corpus, space, hyper);
    auto m2 = LinearClassifier::train(corpus, space, hyper);
    REQUIRE(m1.params().size() == m2.params().size());
    for (std::size_t i = 0; i < m1.params().size(); ++i) CHECK(m1.params()[i] == m2.params()[i]);
}

TEST_CASE("single-label corpus is rejected") {
    std::vector<TrainingExample> corpus = {{"only one", UnitLabel::B}, {"label here", UnitLabel::B}};
    FeatureSpace space;
    space.dim = 1u << 12;
    try {
        LinearClassifier::train(corpus, space, TrainHyper{});
        FAIL("expected DegenerateCorpus");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DegenerateCorpus);
    }
}

TEST_CASE("full-batch descent with small lr never increases loss early on") {
    auto corpus = separable_corpus(30, 17);
    FeatureSpace space;
    space.dim = 1u << 12;
    TrainHyper hyper;
    hyper.lr = 0.02;
    hyper.epochs = 11;
    hyper.batch_size = static_cast<std::uint32_t>(corpus.size()); // full batch
    auto model = LinearClassifier::train(corpus, space, hyper);
    const auto& losses = model.stats().epoch_loss;
    REQUIRE(losses.size() == 11);
    for (std::size_t i = 0; i + 1 < losses.size() && i < 10; ++i)
        CHECK(losses[i + 1] <= losses[i] + 1e-12);
}

TEST_CASE("all-zero model scores uniformly and tie-breaks to A") {
    FeatureSpace space;
    space.dim = 1u << 10;
    std::vector<double> zeros(static_cast<std::size_t>(space.dim) * 3 + 3, 0.0);
    LinearClassifier model(space, zeros);
    auto labeled = model.predict(make_unit("anything at all"));
    CHECK(labeled.scores[0] == 1.0 / 3.0);
    CHECK(labeled.scores[1] == 1.0 / 3.0);
    CHECK(labeled.scores[2] == 1.0 / 3.0);
    CHECK(labeled.label == UnitLabel::A);
}

TEST_CASE("scores sum to one and stay in range") {
    auto corpus = separable_corpus(30, 23);
    FeatureSpace space;
    space.dim = 1u << 12;
    auto model = LinearClassifier::train(corpus, space, TrainHyper{});
    std::mt19937 rng(5);
    const std::vector<std::string> words = {"fever", "cough", "redflagsign", "usefulhint",
                                            "routinenote", "心率", "stable"};
    for (int i = 0; i < 200; ++i) {
        std::string text = words[rng() % words.size()] + " " + words[rng() % words.size()];
        auto labeled = model.predict(make_unit(text));
        double sum = labeled.scores[0] + labeled.scores[1] + labeled.scores[2];
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        for (auto s : labeled.scores) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        CHECK(labeled.label == argmax_label(labeled.scores));
    }
}

TEST_CASE("batch prediction preserves input order") {
    auto corpus = separable_corpus(20, 29);
    FeatureSpace space;
    space.dim = 1u << 12;
    auto model = LinearClassifier::train(corpus, space, TrainHyper{});
    std::vector<TextUnit> units;
    for (int i = 0; i < 9; ++i) units.push_back(make_unit("unit number " + std::to_string(i), i));
    auto labeled = model.predict_batch(units);
    REQUIRE(labeled.size() == 9);
    for (std::size_t i = 0; i < 9; ++i) CHECK(labeled[i].unit.index == i);
}

TEST_CASE("save/load round-trip reproduces predictions bit-identically") {
    auto corpus = separable_corpus(40, 31);
    FeatureSpace space;
    space.dim = 1u << 12;
    auto model = LinearClassifier::train(corpus, space, TrainHyper{});
    std::string path = temp_path("arag_model_roundtrip.bin");
    model.save(path);
    auto loaded = LinearClassifier::load(path);

    std::mt19937 rng(37);
    const std::vector<std::string> words = {"fever", "redflagsign", "usefulhint", "routinenote",
                                            "cough", "headache"};
    for (int i = 0; i < 100; ++i) {
        std::string text = words[rng() % words.size()] + " " + words[rng() % words.size()];
        auto a = model.predict(make_unit(text));
        auto b = loaded.predict(make_unit(text));
        CHECK(a.label == b.label);
        for (std::size_t c = 0; c < 3; ++c) CHECK(a.scores[c] == b.scores[c]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("truncated model file is a schema mismatch") {
    auto corpus = separable_corpus(10, 41);
    FeatureSpace space;
    space.dim = 1u << 10;
    auto model = LinearClassifier::train(corpus, space, TrainHyper{});
    std::string path = temp_path("arag_model_trunc.bin");
    model.save(path);
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    try {
        LinearClassifier::load(path);
        FAIL("expected SchemaMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SchemaMismatch);
    }
    std::filesystem::remove(path);
}

TEST_CASE("unknown model version names both versions") {
    std::string path = temp_path("arag_model_badver.bin");
    {
        std::ofstream out(path, std::ios::binary);
        out.write("ARAGMDL\0", 8);
        std::uint32_t version = 7;
        out.write(reinterpret_cast<const char*>(&version), sizeof version);
    }
    try {
        LinearClassifier::load(path);
        FAIL("expected SchemaMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SchemaMismatch);
        std::string msg = e.what();
        CHECK(msg.find('7') != std::string::npos);
        CHECK(msg.find('1') != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("model-grade feature space requires dim >= 1024") {
    FeatureSpace space;
    space.dim = 512;
    std::vector<TrainingExample> corpus = {{"a", UnitLabel::A}, {"b", UnitLabel::B}};
    CHECK_THROWS_AS(LinearClassifier::train(corpus, space, TrainHyper{}), Error);
}

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <thread>

TEST_CASE("remote classifier backend speaks the batch protocol") {
    httplib::Server server;
    std::string captured_body;
    server.Post("/classify", [&](const httplib::Request& req, httplib::Response& res) {
        captured_body = req.body;
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json labels = nlohmann::json::array();
        nlohmann::json scores = nlohmann::json::array();
        for (const auto& text : body.at("texts")) {
            bool critical = text.get<std::string>().find("critical") != std::string::npos;
            labels.push_back(critical ? "A" : "C");
            scores.push_back(critical ? nlohmann::json::array({0.8, 0.1, 0.1})
                                      : nlohmann::json::array({0.1, 0.2, 0.7}));
        }
        res.set_content(nlohmann::json{{"labels", labels}, {"scores", scores}}.dump(),
                        "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteClassifier remote("http://127.0.0.1:" + std::to_string(port) + "/classify");
    std::vector<TextUnit> units = {make_unit("critical finding", 0), make_unit("routine note", 1)};
    auto labeled = remote.predict_batch(units);
    REQUIRE(labeled.size() == 2);
    CHECK(labeled[0].label == UnitLabel::A);
    CHECK(labeled[1].label == UnitLabel::C);
    CHECK(labeled[0].scores[0] == doctest::Approx(0.8));
    for (const auto& lu : labeled) {
        double sum = lu.scores[0] + lu.scores[1] + lu.scores[2];
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        CHECK(lu.label == argmax_label(lu.scores));
    }
    auto sent = nlohmann::json::parse(captured_body);
    CHECK(sent.at("texts").size() == 2);
    CHECK(sent.at("texts")[0] == "critical finding");

    server.stop();
    listener.join();
}

TEST_CASE("remote classifier rejects malformed score payloads") {
    httplib::Server server;
    server.Post("/classify", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"labels\": [\"A\"], \"scores\": [[0.5, 0.5]]}", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteClassifier remote("http://127.0.0.1:" + std::to_string(port) + "/classify");
    try {
        remote.predict(make_unit("x"));
        FAIL("expected MalformedProviderPayload");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MalformedProviderPayload);
    }
    server.stop();
    listener.join();
}
