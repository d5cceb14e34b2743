#pragma once

#include "arag/classifier.hpp"
#include "arag/completeness.hpp"
#include "arag/filter.hpp"
#include "arag/index.hpp"
#include "arag/llm.hpp"
#include "arag/rerank.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace arag {

// Ablation switches; all on for the full pipeline.
struct PipelineToggles {
    bool decision = true;       // off: every record retrieves
    bool chunking = true;       // off: one chunk per document at index build
    bool mapping_rerank = true; // off: documents ranked by best chunk score
    bool diff_filter = true;    // off: kept docs = retrieved docs
};

struct GatewayConfig {
    std::string backend = "mock"; // "mock" or "http"
    HttpLlmConfig http;
    std::string mock_rules_path;
    std::optional<std::string> mock_default;
    int max_concurrent = 4;
    double temperature = 0.0;
    int max_tokens = 1024;
};

struct ClassifierConfig {
    FeatureSpace space;
    TrainHyper hyper;
    std::string remote_endpoint; // non-empty selects the HTTP classifier backend
    int remote_timeout_ms = 10000;
};

struct TemplatePaths {
    std::string diag;
    std::string diff;
    std::string rag;
};

struct PipelineConfig {
    CompletenessWeights weights;
    RoutingThresholds thresholds;
    std::size_t m = 5; // chunks per query
    std::size_t k = 3; // documents after rerank
    std::size_t max_chunk_chars = 256;
    Bm25Params bm25;
    SegmentationConfig segmentation = SegmentationConfig::defaults();
    ClassifierConfig classifier;
    GatewayConfig gateway;
    TemplatePaths templates;
    PipelineToggles toggles;
    int threads = 0; // 0 = library default

    void validate() const;
    IndexConfig index_config() const;

    // Strict parse: unknown keys anywhere are ConfigErrors (fail fast on typos).
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig from_file(const std::string& path);
};

enum class RoutePolicy : std::uint8_t { Adaptive, AlwaysRetrieve, NeverRetrieve };

const char* route_policy_name(RoutePolicy p);

struct CallCounts {
    std::size_t llm_calls = 0;
    std::size_t retriever_queries = 0;
};

// Full per-record trace: every decision the pipeline took is recorded.
struct DiagnosisOutcome {
    std::string record_id;
    std::string final_diagnosis;
    RoutingDecision route = RoutingDecision::Retrieve;
    double completeness = 0.0;
    std::vector<UnitLabel> labels;
    std::vector<std::size_t> queries_used;   // unit indices used as queries
    std::vector<std::string> retrieved_docs; // rerank order
    std::vector<std::string> kept_docs;      // after filtering
    bool warning = false;
    bool query_fallback = false; // all-C record, every unit used
    bool empty_evidence = false; // retrieval branch ended with no documents
    CallCounts calls;
    bool failed = false;
    std::string error;

    nlohmann::json to_json() const;
};

struct BatchSummary {
    std::size_t n_records = 0;
    std::size_t direct = 0;
    std::size_t retrieve = 0;
    std::size_t retrieve_with_warning = 0;
    std::size_t failures = 0;
    double mean_completeness = 0.0;
    CallCounts totals;
    double wall_ms = 0.0;

    nlohmann::json to_json() const;
};

struct BenchRow {
    std::string policy;
    std::size_t n_records = 0;
    double retrieval_rate = 0.0;
    std::size_t llm_calls = 0;
    std::size_t retriever_queries = 0;
    double wall_ms = 0.0;
};

std::string bench_csv(std::span<const BenchRow> rows);

class Pipeline {
public:
    Pipeline(PipelineConfig config, std::shared_ptr<UnitClassifier> classifier,
             std::shared_ptr<KnowledgeIndex> kb, std::shared_ptr<LlmGateway> gateway);

    // Stage errors propagate with stage attribution; a gateway failure on the
    // final diagnosis call yields a failed outcome instead.
    DiagnosisOutcome diagnose(const EmrRecord& record, RoutePolicy policy = RoutePolicy::Adaptive,
                              bool inner_parallel = true) const;

    std::pair<std::vector<DiagnosisOutcome>, BatchSummary>
    run_batch(std::span<const EmrRecord> records, RoutePolicy policy = RoutePolicy::Adaptive,
              bool parallel = true) const;

    std::vector<BenchRow> bench(std::span<const EmrRecord> records,
                                std::span<const RoutePolicy> policies, bool parallel = true) const;

    const PipelineConfig& config() const { return config_; }
    const LlmGateway& gateway() const { return *gateway_; }

private:
    PipelineConfig config_;
    std::shared_ptr<UnitClassifier> classifier_;
    std::shared_ptr<KnowledgeIndex> kb_;
    std::shared_ptr<LlmGateway> gateway_;
    PromptTemplate diag_;
    PromptTemplate diff_;
    PromptTemplate rag_;
};

} // namespace arag
