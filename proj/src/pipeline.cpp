#include "arag/pipeline.hpp"

#include "arag/errors.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace arag {

using nlohmann::json;

void PipelineConfig::validate() const {
    weights.validate();
    thresholds.validate();
    bm25.validate();
    segmentation.validate();
    classifier.space.validate();
    if (m < 1) raise(Errc::ConfigError, "config: m must be >= 1");
    if (k < 1) raise(Errc::ConfigError, "config: k must be >= 1");
    if (max_chunk_chars < 32) raise(Errc::ConfigError, "config: max_chunk_chars must be >= 32");
    if (gateway.backend != "mock" && gateway.backend != "http")
        raise(Errc::ConfigError, "config: gateway.backend must be \"mock\" or \"http\"");
    if (gateway.max_concurrent < 1) raise(Errc::ConfigError, "config: gateway.max_concurrent must be >= 1");
    if (threads < 0) raise(Errc::ConfigError, "config: threads must be >= 0");
}

IndexConfig PipelineConfig::index_config() const {
    IndexConfig ic;
    ic.max_chunk_chars = max_chunk_chars;
    ic.whole_doc_chunks = !toggles.chunking;
    ic.bm25 = bm25;
    ic.segmentation = segmentation;
    return ic;
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (key == a) {
                known = true;
                break;
            }
        if (!known) raise(Errc::ConfigError, "config: unknown key \"" + where + key + "\"");
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        raise(Errc::ConfigError, std::string("config: bad value for \"") + key + "\"");
    }
}

} // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    if (!j.is_object()) raise(Errc::ConfigError, "config: root must be a JSON object");
    reject_unknown_keys(j,
                        {"weights", "thresholds", "retrieval", "segmentation", "classifier",
                         "gateway", "templates", "toggles", "threads"},
                        "");

    PipelineConfig c;
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        reject_unknown_keys(w, {"label_a", "label_b", "label_c"}, "weights.");
        read_field(w, "label_a", c.weights.label_a);
        read_field(w, "label_b", c.weights.label_b);
        read_field(w, "label_c", c.weights.label_c);
    }
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        reject_unknown_keys(t, {"direct", "warning"}, "thresholds.");
        read_field(t, "direct", c.thresholds.direct);
        read_field(t, "warning", c.thresholds.warning);
    }
    if (j.contains("retrieval")) {
        const auto& r = j.at("retrieval");
        reject_unknown_keys(r, {"m", "k", "max_chunk_chars", "bm25"}, "retrieval.");
        read_field(r, "m", c.m);
        read_field(r, "k", c.k);
        read_field(r, "max_chunk_chars", c.max_chunk_chars);
        if (r.contains("bm25")) {
            const auto& b = r.at("bm25");
            reject_unknown_keys(b, {"k1", "b"}, "retrieval.bm25.");
            read_field(b, "k1", c.bm25.k1);
            read_field(b, "b", c.bm25.b);
        }
    }
    if (j.contains("segmentation")) {
        const auto& s = j.at("segmentation");
        reject_unknown_keys(s, {"terminators", "max_unit_chars", "strip_whitespace"}, "segmentation.");
        read_field(s, "terminators", c.segmentation.terminators);
        read_field(s, "max_unit_chars", c.segmentation.max_unit_chars);
        read_field(s, "strip_whitespace", c.segmentation.strip_whitespace);
    }
    if (j.contains("classifier")) {
        const auto& cl = j.at("classifier");
        reject_unknown_keys(cl,
                            {"dim", "ngram_orders", "l2", "lr", "epochs", "seed", "batch_size",
                             "remote_endpoint", "remote_timeout_ms"},
                            "classifier.");
        read_field(cl, "dim", c.classifier.space.dim);
        read_field(cl, "ngram_orders", c.classifier.space.ngram_orders);
        read_field(cl, "l2", c.classifier.hyper.l2);
        read_field(cl, "lr", c.classifier.hyper.lr);
        read_field(cl, "epochs", c.classifier.hyper.epochs);
        read_field(cl, "seed", c.classifier.hyper.seed);
        read_field(cl, "batch_size", c.classifier.hyper.batch_size);
        read_field(cl, "remote_endpoint", c.classifier.remote_endpoint);
        read_field(cl, "remote_timeout_ms", c.classifier.remote_timeout_ms);
    }
    if (j.contains("gateway")) {
        const auto& g = j.at("gateway");
        reject_unknown_keys(g,
                            {"backend", "endpoint", "model", "api_key_env", "timeout_ms",
                             "max_retries", "backoff_base_ms", "max_concurrent", "mock_rules",
                             "mock_default", "temperature", "max_tokens"},
                            "gateway.");
        read_field(g, "backend", c.gateway.backend);
        read_field(g, "endpoint", c.gateway.http.endpoint);
        read_field(g, "model", c.gateway.http.model);
        read_field(g, "api_key_env", c.gateway.http.api_key_env);
        read_field(g, "timeout_ms", c.gateway.http.timeout_ms);
        read_field(g, "max_retries", c.gateway.http.max_retries);
        read_field(g, "backoff_base_ms", c.gateway.http.backoff_base_ms);
        read_field(g, "max_concurrent", c.gateway.max_concurrent);
        read_field(g, "mock_rules", c.gateway.mock_rules_path);
        if (g.contains("mock_default"))
            c.gateway.mock_default = g.at("mock_default").get<std::string>();
        read_field(g, "temperature", c.gateway.temperature);
        read_field(g, "max_tokens", c.gateway.max_tokens);
    }
    if (j.contains("templates")) {
        const auto& t = j.at("templates");
        reject_unknown_keys(t, {"diag", "diff", "rag"}, "templates.");
        read_field(t, "diag", c.templates.diag);
        read_field(t, "diff", c.templates.diff);
        read_field(t, "rag", c.templates.rag);
    }
    if (j.contains("toggles")) {
        const auto& t = j.at("toggles");
        reject_unknown_keys(t, {"decision", "chunking", "mapping_rerank", "diff_filter"}, "toggles.");
        read_field(t, "decision", c.toggles.decision);
        read_field(t, "chunking", c.toggles.chunking);
        read_field(t, "mapping_rerank", c.toggles.mapping_rerank);
        read_field(t, "diff_filter", c.toggles.diff_filter);
    }
    read_field(j, "threads", c.threads);
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::IoFailure, "cannot open config: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) raise(Errc::ConfigError, "config: invalid JSON in " + path);
    return from_json(j);
}

const char* route_policy_name(RoutePolicy p) {
    switch (p) {
    case RoutePolicy::Adaptive: return "adaptive";
    case RoutePolicy::AlwaysRetrieve: return "always";
    case RoutePolicy::NeverRetrieve: return "never";
    }
    return "?";
}

json DiagnosisOutcome::to_json() const {
    std::string label_str;
    label_str.reserve(labels.size());
    for (auto l : labels) label_str.push_back(label_char(l));
    return json{{"id", record_id},
                {"final_diagnosis", final_diagnosis},
                {"route", routing_decision_name(route)},
                {"completeness", completeness},
                {"labels", label_str},
                {"queries_used", queries_used},
                {"retrieved_docs", retrieved_docs},
                {"kept_docs", kept_docs},
                {"warning", warning},
                {"query_fallback", query_fallback},
                {"empty_evidence", empty_evidence},
                {"llm_calls", calls.llm_calls},
                {"retriever_queries", calls.retriever_queries},
                {"failed", failed},
                {"error", error}};
}

json BatchSummary::to_json() const {
    return json{{"records", n_records},
                {"direct", direct},
                {"retrieve", retrieve},
                {"retrieve_with_warning", retrieve_with_warning},
                {"failures", failures},
                {"mean_completeness", mean_completeness},
                {"llm_calls", totals.llm_calls},
                {"retriever_queries", totals.retriever_queries},
                {"wall_ms", wall_ms}};
}

std::string bench_csv(std::span<const BenchRow> rows) {
    std::ostringstream out;
    out << "policy,records,retrieval_rate,llm_calls,retriever_queries,wall_ms\n";
    for (const auto& r : rows)
        out << r.policy << ',' << r.n_records << ',' << r.retrieval_rate << ',' << r.llm_calls
            << ',' << r.retriever_queries << ',' << r.wall_ms << '\n';
    return out.str();
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<UnitClassifier> classifier,
                   std::shared_ptr<KnowledgeIndex> kb, std::shared_ptr<LlmGateway> gateway)
    : config_(std::move(config)), classifier_(std::move(classifier)), kb_(std::move(kb)),
      gateway_(std::move(gateway)) {
    config_.validate();
    if (!classifier_) raise(Errc::ConfigError, "pipeline: no classifier");
    if (!gateway_) raise(Errc::ConfigError, "pipeline: no gateway");
    diag_ = config_.templates.diag.empty() ? PromptTemplate::builtin(TemplateKind::Diag)
                                           : PromptTemplate::from_file(TemplateKind::Diag, config_.templates.diag);
    diff_ = config_.templates.diff.empty() ? PromptTemplate::builtin(TemplateKind::Diff)
                                           : PromptTemplate::from_file(TemplateKind::Diff, config_.templates.diff);
    rag_ = config_.templates.rag.empty() ? PromptTemplate::builtin(TemplateKind::Rag)
                                         : PromptTemplate::from_file(TemplateKind::Rag, config_.templates.rag);
}

namespace {

[[noreturn]] void rethrow_with_stage(const Error& e, const std::string& record_id,
                                     const char* stage) {
    throw Error(e.code(), "record " + record_id + " stage=" + stage + ": " + e.what());
}

} // namespace

DiagnosisOutcome Pipeline::diagnose(const EmrRecord& record, RoutePolicy policy,
                                    bool inner_parallel) const {
    DiagnosisOutcome out;
    out.record_id = record.id;

    std::vector<TextUnit> units;
    try {
        units = segment(record.text, config_.segmentation);
    } catch (const Error& e) {
        rethrow_with_stage(e, record.id, "segment");
    }

    std::vector<LabeledUnit> labeled;
    try {
        labeled = classifier_->predict_batch(units, inner_parallel);
    } catch (const Error& e) {
        rethrow_with_stage(e, record.id, "classify");
    }
    out.labels.reserve(labeled.size());
    for (const auto& lu : labeled) out.labels.push_back(lu.label);

    CompletenessReport report;
    try {
        report = assess(out.labels, config_.weights, config_.thresholds);
    } catch (const Error& e) {
        rethrow_with_stage(e, record.id, "completeness");
    }
    out.completeness = report.completeness;

    // Routing itself costs no LLM call; the decision module (and its warning
    // branch) is bypassed entirely under a forced policy or the ablation.
    if (policy == RoutePolicy::NeverRetrieve) {
        out.route = RoutingDecision::Direct;
    } else if (policy == RoutePolicy::AlwaysRetrieve || !config_.toggles.decision) {
        out.route = RoutingDecision::Retrieve;
    } else {
        out.route = report.decision;
    }
    out.warning = out.route == RoutingDecision::RetrieveWithWarning;

    auto final_call = [&](const PromptTemplate& tmpl, std::map<std::string, std::string> bindings) {
        LlmRequest req;
        req.prompt = render(tmpl, std::move(bindings));
        req.temperature = config_.gateway.temperature;
        req.max_tokens = config_.gateway.max_tokens;
        req.tag = "final:" + record.id;
        ++out.calls.llm_calls;
        try {
            out.final_diagnosis = gateway_->complete(req).text;
        } catch (const std::exception& e) {
            out.failed = true;
            out.error = std::string("final call: ") + e.what();
        }
    };

    if (out.route == RoutingDecision::Direct) {
        final_call(diag_, {{"patient", record.text}});
        return out;
    }

    // retrieval branch
    QuerySelection selection;
    std::vector<ChunkHit> hits;
    try {
        if (!kb_) raise(Errc::ConfigError, "no knowledge index loaded");
        selection = select_queries(labeled);
        out.query_fallback = selection.fallback;
        out.queries_used = selection.unit_indices;
        out.calls.retriever_queries = selection.queries.size();
        hits = gather(selection.queries, *kb_, config_.m, inner_parallel);
    } catch (const Error& e) {
        rethrow_with_stage(e, record.id, "retrieve");
    }

    try {
        out.retrieved_docs = config_.toggles.mapping_rerank
                                 ? rerank_docs(hits, config_.k)
                                 : rank_docs_by_best_score(hits, config_.k);
    } catch (const Error& e) {
        rethrow_with_stage(e, record.id, "rerank");
    }

    std::vector<KnowledgeDoc> docs;
    for (const auto& id : out.retrieved_docs) {
        const KnowledgeDoc* d = kb_->find_doc(id);
        if (d != nullptr) docs.push_back(*d);
    }

    std::vector<KnowledgeDoc> kept;
    if (config_.toggles.diff_filter) {
        FilterResult fr = filter_docs(record.text, docs, *gateway_, diff_, inner_parallel);
        out.calls.llm_calls += docs.size();
        kept = std::move(fr.kept);
    } else {
        kept = std::move(docs);
    }
    for (const auto& d : kept) out.kept_docs.push_back(d.doc_id);
    out.empty_evidence = kept.empty();

    std::string evidence;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i > 0) evidence += kDocumentSeparator;
        evidence += kept[i].title + "\n" + kept[i].body;
    }
    final_call(rag_, {{"patient", record.text}, {"documents", evidence}});
    return out;
}

std::pair<std::vector<DiagnosisOutcome>, BatchSummary>
Pipeline::run_batch(std::span<const EmrRecord> records, RoutePolicy policy, bool parallel) const {
    auto started = std::chrono::steady_clock::now();
    std::vector<DiagnosisOutcome> outcomes(records.size());

    const auto n = static_cast<std::ptrdiff_t>(records.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        auto u = static_cast<std::size_t>(i);
        try {
            outcomes[u] = diagnose(records[u], policy, /*inner_parallel=*/!parallel);
        } catch (const std::exception& e) {
            outcomes[u].record_id = records[u].id;
            outcomes[u].failed = true;
            outcomes[u].error = e.what();
        }
    }

    BatchSummary s;
    s.n_records = records.size();
    double completeness_sum = 0.0;
    for (const auto& o : outcomes) {
        if (o.failed) ++s.failures;
        switch (o.route) {
        case RoutingDecision::Direct: ++s.direct; break;
        case RoutingDecision::Retrieve: ++s.retrieve; break;
        case RoutingDecision::RetrieveWithWarning: ++s.retrieve_with_warning; break;
        }
        completeness_sum += o.completeness;
        s.totals.llm_calls += o.calls.llm_calls;
        s.totals.retriever_queries += o.calls.retriever_queries;
    }
    s.mean_completeness = records.empty() ? 0.0 : completeness_sum / static_cast<double>(records.size());
    s.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                    .count();
    return {std::move(outcomes), s};
}

std::vector<BenchRow> Pipeline::bench(std::span<const EmrRecord> records,
                                      std::span<const RoutePolicy> policies, bool parallel) const {
    std::vector<BenchRow> rows;
    for (RoutePolicy policy : policies) {
        auto [outcomes, summary] = run_batch(records, policy, parallel);
        BenchRow row;
        row.policy = route_policy_name(policy);
        row.n_records = summary.n_records;
        std::size_t retrievals = summary.retrieve + summary.retrieve_with_warning;
        row.retrieval_rate = records.empty()
                                 ? 0.0
                                 : static_cast<double>(retrievals) / static_cast<double>(records.size());
        row.llm_calls = summary.totals.llm_calls;
        row.retriever_queries = summary.totals.retriever_queries;
        row.wall_ms = summary.wall_ms;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace arag
