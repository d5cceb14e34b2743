#include "arag/classifier.hpp"

#include "arag/errors.hpp"
#include "arag/http.hpp"
#include "arag/serialize.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace arag {

char label_char(UnitLabel l) {
    switch (l) {
    case UnitLabel::A: return 'A';
    case UnitLabel::B: return 'B';
    case UnitLabel::C: return 'C';
    }
    return '?';
}

UnitLabel label_from_string(std::string_view s) {
    if (s == "A") return UnitLabel::A;
    if (s == "B") return UnitLabel::B;
    if (s == "C") return UnitLabel::C;
    raise(Errc::DataError, "unknown label \"" + std::string(s) + "\" (expected A, B or C)");
}

UnitLabel argmax_label(const std::array<double, kNumLabels>& scores) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumLabels; ++c)
        if (scores[c] > scores[best]) best = c; // strict: ties keep A > B > C order
    return static_cast<UnitLabel>(best);
}

void FeatureSpace::validate() const {
    if (dim < 2) raise(Errc::ConfigError, "feature space: dim must be >= 2");
    if (ngram_orders.empty()) raise(Errc::ConfigError, "feature space: ngram_orders must be non-empty");
    for (auto n : ngram_orders)
        if (n == 0) raise(Errc::ConfigError, "feature space: ngram order 0 is invalid");
}

void FeatureSpace::validate_model_grade() const {
    validate();
    if (dim < (1u << 10)) raise(Errc::ConfigError, "classifier: hash dimension must be >= 1024");
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

// ASCII lowercase; everything else passes through.
std::string fold_ascii(std::string_view text) {
    std::string out(text);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

void encode_utf8(char32_t cp, std::string& out) {
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

SparseVec featurize(std::string_view text, const FeatureSpace& space) {
    space.validate();
    std::string folded = fold_ascii(text);
    std::u32string cps = utf8::to_codepoints(folded);

    std::map<std::uint32_t, double> counts; // ordered: deterministic item order

    std::string key;
    auto bump = [&](char family, std::string_view content) {
        key.clear();
        key.push_back(family);
        key.append(content);
        counts[static_cast<std::uint32_t>(fnv1a64(key) % space.dim)] += 1.0;
    };

    // n-grams stay within whitespace-separated segments, so duplicating a
    // text scales every count uniformly
    std::string gram;
    auto emit_ngrams = [&](std::u32string_view seg) {
        for (auto order : space.ngram_orders) {
            if (seg.size() < order) continue;
            for (std::size_t i = 0; i + order <= seg.size(); ++i) {
                gram.clear();
                for (std::size_t j = 0; j < order; ++j) encode_utf8(seg[i + j], gram);
                bump('c', gram);
            }
        }
    };

    std::string token;
    std::size_t seg_start = 0;
    auto flush_segment = [&](std::size_t end) {
        if (end > seg_start) {
            emit_ngrams(std::u32string_view(cps).substr(seg_start, end - seg_start));
            if (space.token_unigrams) {
                token.clear();
                for (std::size_t i = seg_start; i < end; ++i) encode_utf8(cps[i], token);
                bump('w', token);
            }
        }
        seg_start = end + 1;
    };
    for (std::size_t i = 0; i < cps.size(); ++i)
        if (utf8::is_space(cps[i])) flush_segment(i);
    flush_segment(cps.size());

    double norm_sq = 0.0;
    for (const auto& [idx, v] : counts) norm_sq += v * v;
    double inv = norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 0.0;

    SparseVec out;
    out.items.reserve(counts.size());
    for (const auto& [idx, v] : counts) out.items.emplace_back(idx, v * inv);
    return out;
}

std::array<double, kNumLabels> softmax3(const std::array<double, kNumLabels>& z) {
    double zmax = std::max({z[0], z[1], z[2]});
    std::array<double, kNumLabels> e{};
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumLabels; ++c) {
        e[c] = std::exp(z[c] - zmax);
        sum += e[c];
    }
    for (auto& v : e) v /= sum;
    return e;
}

namespace {

std::array<double, kNumLabels> logits(std::span<const double> params, std::uint32_t dim,
                                      const SparseVec& v) {
    std::array<double, kNumLabels> z{};
    const double* bias = params.data() + static_cast<std::size_t>(dim) * kNumLabels;
    for (std::size_t c = 0; c < kNumLabels; ++c) {
        const double* w = params.data() + c * static_cast<std::size_t>(dim);
        double dot = 0.0;
        for (const auto& [idx, val] : v.items) dot += w[idx] * val;
        z[c] = dot + bias[c];
    }
    return z;
}

} // namespace

double SoftmaxRegression::loss(std::span<const double> params, std::size_t begin,
                               std::size_t end) const {
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        auto p = softmax3(logits(params, dim, x[i]));
        double py = p[static_cast<std::size_t>(y[i])];
        total += -std::log(std::max(py, 1e-300));
    }
    total /= static_cast<double>(end - begin);

    double reg = 0.0;
    std::size_t nw = static_cast<std::size_t>(dim) * kNumLabels;
    for (std::size_t j = 0; j < nw; ++j) reg += params[j] * params[j];
    return total + 0.5 * l2 * reg;
}

void SoftmaxRegression::gradient(std::span<const double> params, std::size_t begin,
                                 std::size_t end, std::span<double> out, bool parallel) const {
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    gradient_indexed(params, idx, out, parallel);
}

void SoftmaxRegression::gradient_indexed(std::span<const double> params,
                                         std::span<const std::size_t> idx, std::span<double> out,
                                         bool parallel) const {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t n = idx.size();
    if (n == 0) return;

    // score pass: independent per example
    std::vector<std::array<double, kNumLabels>> probs(n);
    const auto ni = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t i = 0; i < ni; ++i)
        probs[static_cast<std::size_t>(i)] =
            softmax3(logits(params, dim, x[idx[static_cast<std::size_t>(i)]]));

    // accumulation pass: fixed order, independent of thread count
    const double inv_n = 1.0 / static_cast<double>(n);
    double* bias_grad = out.data() + static_cast<std::size_t>(dim) * kNumLabels;
    for (std::size_t i = 0; i < n; ++i) {
        const SparseVec& v = x[idx[i]];
        for (std::size_t c = 0; c < kNumLabels; ++c) {
            double delta = (probs[i][c] - (static_cast<std::size_t>(y[idx[i]]) == c ? 1.0 : 0.0)) * inv_n;
            double* w = out.data() + c * static_cast<std::size_t>(dim);
            for (const auto& [j, val] : v.items) w[j] += delta * val;
            bias_grad[c] += delta;
        }
    }

    std::size_t nw = static_cast<std::size_t>(dim) * kNumLabels;
    for (std::size_t j = 0; j < nw; ++j) out[j] += l2 * params[j];
}

LinearClassifier::LinearClassifier(FeatureSpace space, std::vector<double> params)
    : space_(std::move(space)), params_(std::move(params)) {
    space_.validate_model_grade();
    if (params_.size() != static_cast<std::size_t>(space_.dim) * kNumLabels + kNumLabels)
        raise(Errc::ConfigError, "classifier: parameter vector does not match feature space");
}

LinearClassifier LinearClassifier::train(const std::vector<TrainingExample>& examples,
                                         const FeatureSpace& space, const TrainHyper& hyper,
                                         bool parallel) {
    space.validate_model_grade();
    if (examples.empty()) raise(Errc::DegenerateCorpus, "train: no examples");

    SoftmaxRegression prob;
    prob.dim = space.dim;
    prob.l2 = hyper.l2;
    prob.x.resize(examples.size());
    prob.y.resize(examples.size());

    std::array<std::uint64_t, kNumLabels> label_counts{};
    const auto ne = static_cast<std::ptrdiff_t>(examples.size());
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t i = 0; i < ne; ++i) {
        auto u = static_cast<std::size_t>(i);
        prob.x[u] = featurize(examples[u].text, space);
    }
    for (std::size_t i = 0; i < examples.size(); ++i) {
        prob.y[i] = examples[i].label;
        ++label_counts[static_cast<std::size_t>(examples[i].label)];
    }

    std::size_t distinct = 0;
    for (auto c : label_counts)
        if (c > 0) ++distinct;
    if (distinct < 2) raise(Errc::DegenerateCorpus, "train: corpus has a single label; need at least two");

    std::vector<double> params(prob.param_count(), 0.0);
    std::vector<double> grad(prob.param_count(), 0.0);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);

    std::mt19937_64 rng(hyper.seed);
    const std::size_t batch = std::max<std::uint32_t>(1, hyper.batch_size);

    TrainStats stats;
    stats.n_examples = examples.size();
    stats.label_counts = label_counts;

    for (std::uint32_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        stats.epoch_loss.push_back(prob.loss(params, 0, examples.size()));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t off = 0; off < order.size(); off += batch) {
            std::size_t len = std::min(batch, order.size() - off);
            prob.gradient_indexed(params, std::span<const std::size_t>(order).subspan(off, len),
                                  grad, parallel);
            for (std::size_t j = 0; j < params.size(); ++j) params[j] -= hyper.lr * grad[j];
        }
    }

    LinearClassifier model(space, std::move(params));
    model.hyper_ = hyper;

    std::size_t correct = 0;
    std::array<double, kNumLabels> z{};
    const double* bias = model.params_.data() + static_cast<std::size_t>(space.dim) * kNumLabels;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        for (std::size_t c = 0; c < kNumLabels; ++c) {
            const double* w = model.params_.data() + c * static_cast<std::size_t>(space.dim);
            double dot = 0.0;
            for (const auto& [idx, val] : prob.x[i].items) dot += w[idx] * val;
            z[c] = dot + bias[c];
        }
        if (argmax_label(softmax3(z)) == prob.y[i]) ++correct;
    }
    stats.final_train_accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
    model.stats_ = std::move(stats);
    return model;
}

std::array<double, kNumLabels> LinearClassifier::score_text(std::string_view text) const {
    SparseVec v = featurize(text, space_);
    return softmax3(logits(params_, space_.dim, v));
}

LabeledUnit LinearClassifier::predict(const TextUnit& unit) const {
    LabeledUnit out;
    out.unit = unit;
    out.scores = score_text(unit.text);
    out.label = argmax_label(out.scores);
    return out;
}

std::vector<LabeledUnit> LinearClassifier::predict_batch(std::span<const TextUnit> units,
                                                         bool parallel) const {
    std::vector<LabeledUnit> out(units.size());
    const auto n = static_cast<std::ptrdiff_t>(units.size());
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = predict(units[static_cast<std::size_t>(i)]);
    return out;
}

namespace {
constexpr char kModelMagic[9] = "ARAGMDL\0";
constexpr std::uint32_t kModelVersion = 1;
} // namespace

void LinearClassifier::save(const std::string& path) const {
    BinaryWriter w(path);
    w.magic(kModelMagic);
    w.u32(kModelVersion);
    w.u32(space_.dim);
    w.u32(space_.token_unigrams ? 1 : 0);
    w.u64(space_.ngram_orders.size());
    for (auto o : space_.ngram_orders) w.u32(o);
    w.f64(hyper_.l2);
    w.u32(hyper_.epochs);
    w.f64(hyper_.lr);
    w.u64(hyper_.seed);
    w.u32(hyper_.batch_size);
    w.u64(stats_.n_examples);
    for (auto c : stats_.label_counts) w.u64(c);
    w.f64(stats_.final_train_accuracy);
    w.f64s(stats_.epoch_loss);
    w.f64s(params_);
    w.finish(path);
}

LinearClassifier LinearClassifier::load(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic(kModelMagic);
    r.expect_version(kModelVersion);

    FeatureSpace space;
    space.dim = r.u32();
    space.token_unigrams = r.u32() != 0;
    space.ngram_orders.resize(r.u64());
    for (auto& o : space.ngram_orders) o = r.u32();

    TrainHyper hyper;
    hyper.l2 = r.f64();
    hyper.epochs = r.u32();
    hyper.lr = r.f64();
    hyper.seed = r.u64();
    hyper.batch_size = r.u32();

    TrainStats stats;
    stats.n_examples = r.u64();
    for (auto& c : stats.label_counts) c = r.u64();
    stats.final_train_accuracy = r.f64();
    stats.epoch_loss = r.f64s();

    std::vector<double> params = r.f64s();
    LinearClassifier model(std::move(space), std::move(params));
    model.hyper_ = hyper;
    model.stats_ = std::move(stats);
    return model;
}

RemoteClassifier::RemoteClassifier(std::string endpoint, int timeout_ms)
    : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

LabeledUnit RemoteClassifier::predict(const TextUnit& unit) const {
    return predict_batch(std::span<const TextUnit>(&unit, 1), false).front();
}

std::vector<LabeledUnit> RemoteClassifier::predict_batch(std::span<const TextUnit> units,
                                                         bool /*parallel*/) const {
    nlohmann::json body;
    body["texts"] = nlohmann::json::array();
    for (const auto& u : units) body["texts"].push_back(u.text);

    std::string raw = http_post_json(endpoint_, body.dump(), /*bearer=*/"", timeout_ms_);

    nlohmann::json resp;
    try {
        resp = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
        raise(Errc::MalformedProviderPayload, std::string("classifier backend: bad JSON: ") + e.what());
    }
    if (!resp.contains("scores") || !resp["scores"].is_array() || resp["scores"].size() != units.size())
        raise(Errc::MalformedProviderPayload, "classifier backend: missing or mismatched scores array");

    std::vector<LabeledUnit> out(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto& row = resp["scores"][i];
        if (!row.is_array() || row.size() != kNumLabels)
            raise(Errc::MalformedProviderPayload, "classifier backend: score row must have 3 entries");
        std::array<double, kNumLabels> s{};
        double sum = 0.0;
        for (std::size_t c = 0; c < kNumLabels; ++c) {
            s[c] = row[c].get<double>();
            if (!(s[c] >= 0.0)) raise(Errc::MalformedProviderPayload, "classifier backend: negative score");
            sum += s[c];
        }
        if (sum <= 0.0) raise(Errc::MalformedProviderPayload, "classifier backend: zero score row");
        for (auto& v : s) v /= sum;
        out[i].unit = units[i];
        out[i].scores = s;
        out[i].label = argmax_label(s);
    }
    return out;
}

} // namespace arag
