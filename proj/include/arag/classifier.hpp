#pragma once

#include "arag/text.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace arag {

enum class UnitLabel : std::uint8_t { A = 0, B = 1, C = 2 };

constexpr std::size_t kNumLabels = 3;

char label_char(UnitLabel l);
UnitLabel label_from_string(std::string_view s); // throws DataError on anything but A/B/C

// A text unit with importance label and class scores. Scores sum to 1; the
// label is the argmax with ties broken A > B > C (ambiguity counts toward
// importance).
struct LabeledUnit {
    TextUnit unit;
    UnitLabel label = UnitLabel::A;
    std::array<double, kNumLabels> scores{};
};

UnitLabel argmax_label(const std::array<double, kNumLabels>& scores);

struct TrainingExample {
    std::string text;
    UnitLabel label;
};

// Hashed n-gram feature definition: character n-grams of the given orders
// (within whitespace-separated segments) plus whitespace-token unigrams,
// hashed into `dim` buckets.
struct FeatureSpace {
    std::vector<std::uint32_t> ngram_orders = {2, 3, 4};
    std::uint32_t dim = 1u << 18;
    bool token_unigrams = true;

    void validate() const;             // orders non-empty, dim >= 2
    void validate_model_grade() const; // additionally dim >= 2^10
};

struct SparseVec {
    // (bucket, value) sorted by bucket, L2-normalized.
    std::vector<std::pair<std::uint32_t, double>> items;
};

// FNV-1a 64-bit, the bucket hash. Exposed so tests can hand-hash features.
std::uint64_t fnv1a64(std::string_view bytes);

SparseVec featurize(std::string_view text, const FeatureSpace& space);

struct TrainHyper {
    double l2 = 1e-4;
    std::uint32_t epochs = 20;
    double lr = 0.1;
    std::uint64_t seed = 42;
    std::uint32_t batch_size = 32; // >= corpus size gives full-batch descent
};

struct TrainStats {
    std::uint64_t n_examples = 0;
    std::array<std::uint64_t, kNumLabels> label_counts{};
    double final_train_accuracy = 0.0;
    std::vector<double> epoch_loss; // loss at the start of each epoch
};

// Multinomial logistic regression over hashed features. Parameters are laid
// out flat as [class0 weights..., class1, class2, bias0, bias1, bias2] so the
// training gradient can be finite-difference checked as one vector.
struct SoftmaxRegression {
    std::uint32_t dim = 0;
    double l2 = 0.0;
    std::vector<SparseVec> x;
    std::vector<UnitLabel> y;

    std::size_t param_count() const { return static_cast<std::size_t>(dim) * kNumLabels + kNumLabels; }

    // Mean cross-entropy over examples [begin, end) plus l2/2 * ||W||^2
    // (biases unregularized).
    double loss(std::span<const double> params, std::size_t begin, std::size_t end) const;

    // Analytic gradient of `loss` into `out` (same layout, zeroed first).
    // The per-example score pass runs in parallel when requested; the
    // accumulation is always serial in index order, so results are
    // bit-identical with or without parallelism.
    void gradient(std::span<const double> params, std::size_t begin, std::size_t end,
                  std::span<double> out, bool parallel = false) const;

    // Gradient over an explicit index subset (mini-batches).
    void gradient_indexed(std::span<const double> params, std::span<const std::size_t> idx,
                          std::span<double> out, bool parallel = false) const;
};

std::array<double, kNumLabels> softmax3(const std::array<double, kNumLabels>& z);

// Classifier backend contract. The native linear model and the remote HTTP
// backend both satisfy it, so the pipeline does not care which is configured.
class UnitClassifier {
public:
    virtual ~UnitClassifier() = default;
    virtual LabeledUnit predict(const TextUnit& unit) const = 0;
    virtual std::vector<LabeledUnit> predict_batch(std::span<const TextUnit> units,
                                                   bool parallel = true) const = 0;
};

class LinearClassifier final : public UnitClassifier {
public:
    LinearClassifier() = default;
    LinearClassifier(FeatureSpace space, std::vector<double> params);

    // Mini-batch gradient descent, deterministic for a fixed seed. Requires
    // at least two distinct labels (DegenerateCorpus otherwise).
    static LinearClassifier train(const std::vector<TrainingExample>& examples,
                                  const FeatureSpace& space, const TrainHyper& hyper,
                                  bool parallel = true);

    LabeledUnit predict(const TextUnit& unit) const override;
    std::vector<LabeledUnit> predict_batch(std::span<const TextUnit> units,
                                           bool parallel = true) const override;
    std::array<double, kNumLabels> score_text(std::string_view text) const;

    void save(const std::string& path) const;
    static LinearClassifier load(const std::string& path);

    const FeatureSpace& feature_space() const { return space_; }
    const TrainHyper& hyper() const { return hyper_; }
    const TrainStats& stats() const { return stats_; }
    std::span<const double> params() const { return params_; }

private:
    FeatureSpace space_;
    TrainHyper hyper_;
    TrainStats stats_;
    std::vector<double> params_; // 3*dim weights + 3 biases
};

// HTTP classifier backend: POST {"texts": [...]} to the endpoint, expects
// {"labels": [...], "scores": [[a,b,c], ...]}. Labels are re-derived from the
// returned scores so the argmax invariant holds regardless of the server.
class RemoteClassifier final : public UnitClassifier {
public:
    RemoteClassifier(std::string endpoint, int timeout_ms = 10000);

    LabeledUnit predict(const TextUnit& unit) const override;
    std::vector<LabeledUnit> predict_batch(std::span<const TextUnit> units,
                                           bool parallel = true) const override;

private:
    std::string endpoint_;
    int timeout_ms_;
};

} // namespace arag
