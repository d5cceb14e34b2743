// arag: adaptive retrieval-augmented diagnosis pipeline.
//
// Subcommands: ingest, index, annotate, train, diagnose, eval, bench.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 backend failure.

#include <arag/annotate.hpp>
#include <arag/errors.hpp>
#include <arag/evaluate.hpp>
#include <arag/io.hpp>
#include <arag/pipeline.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace arag;
using nlohmann::json;

namespace {

int exit_code_for(Errc code) {
    switch (code) {
    case Errc::ConfigError:
    case Errc::MissingBinding:
        return 1;
    case Errc::Timeout:
    case Errc::HttpStatus:
    case Errc::NoMatchingRule:
    case Errc::MalformedProviderPayload:
        return 3;
    default:
        return 2;
    }
}

PipelineConfig load_config(const std::string& path) {
    PipelineConfig config = path.empty() ? PipelineConfig{} : PipelineConfig::from_file(path);
#ifdef _OPENMP
    if (config.threads > 0) omp_set_num_threads(config.threads);
#endif
    return config;
}

std::shared_ptr<LlmGateway> make_gateway(const GatewayConfig& g) {
    std::shared_ptr<LlmClient> client;
    if (g.backend == "http") {
        client = std::make_shared<HttpLlmClient>(g.http);
    } else {
        std::vector<MockRule> rules;
        if (!g.mock_rules_path.empty()) rules = MockLlmClient::load_rules(g.mock_rules_path);
        client = std::make_shared<MockLlmClient>(std::move(rules), g.mock_default);
    }
    return std::make_shared<LlmGateway>(std::move(client), g.max_concurrent);
}

std::shared_ptr<UnitClassifier> make_classifier(const PipelineConfig& config,
                                                const std::string& model_path) {
    if (!config.classifier.remote_endpoint.empty())
        return std::make_shared<RemoteClassifier>(config.classifier.remote_endpoint,
                                                  config.classifier.remote_timeout_ms);
    if (model_path.empty())
        raise(Errc::ConfigError, "no classifier: pass --model or set classifier.remote_endpoint");
    return std::make_shared<LinearClassifier>(LinearClassifier::load(model_path));
}

RoutePolicy parse_policy(const std::string& name) {
    if (name == "adaptive") return RoutePolicy::Adaptive;
    if (name == "always") return RoutePolicy::AlwaysRetrieve;
    if (name == "never") return RoutePolicy::NeverRetrieve;
    raise(Errc::ConfigError, "unknown policy \"" + name + "\"");
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) raise(Errc::IoFailure, "cannot open for write: " + path);
    out << content;
    if (!out) raise(Errc::IoFailure, "write failed: " + path);
}

// ---- subcommand bodies ------------------------------------------------------

int cmd_ingest(const std::string& kb_path, const std::string& emr_path,
               const std::string& term_path) {
    if (kb_path.empty() && emr_path.empty() && term_path.empty())
        raise(Errc::ConfigError, "ingest: nothing to validate; pass --kb, --emr or --terminology");
    if (!kb_path.empty()) {
        auto docs = load_kb(kb_path);
        std::printf("kb: %zu documents ok\n", docs.size());
    }
    if (!emr_path.empty()) {
        auto records = load_emr(emr_path, /*require_reference=*/false);
        std::size_t with_ref = 0;
        for (const auto& r : records)
            if (!r.reference_diagnosis.empty()) ++with_ref;
        std::printf("emr: %zu records ok (%zu with reference diagnosis)\n", records.size(), with_ref);
    }
    if (!term_path.empty()) {
        auto entries = load_terminology(term_path);
        std::printf("terminology: %zu entries ok\n", entries.size());
    }
    return 0;
}

int cmd_index(const std::string& kb_path, const std::string& out_path,
              const std::string& config_path) {
    auto config = load_config(config_path);
    auto docs = load_kb(kb_path);
    auto ki = KnowledgeIndex::build(std::move(docs), config.index_config());
    ki.save(out_path);
    std::printf("indexed %zu documents into %zu chunks -> %s\n", ki.docs().size(),
                ki.index().chunks().size(), out_path.c_str());
    return 0;
}

int cmd_annotate(const std::string& emr_path, const std::string& index_path,
                 const std::string& out_path, const std::string& audit_path,
                 const std::string& config_path) {
    auto config = load_config(config_path);
    auto records = load_emr(emr_path, /*require_reference=*/true);
    auto ki = KnowledgeIndex::load(index_path);
    auto gateway = make_gateway(config.gateway);

    AnnotateConfig ac;
    ac.top_m = config.m;
    ac.segmentation = config.segmentation;
    ac.temperature = config.gateway.temperature;
    ac.max_tokens = config.gateway.max_tokens;
    if (!config.templates.diag.empty())
        ac.diag_template = PromptTemplate::from_file(TemplateKind::Diag, config.templates.diag);

    std::vector<std::string> train_lines;
    std::vector<std::string> audit_lines;
    std::size_t skipped_total = 0, failed_records = 0;

    for (const auto& record : records) {
        try {
            auto units = segment(record.text, config.segmentation);
            auto ann = annotate_record(record, *gateway, ki, ac);
            skipped_total += ann.skipped;
            for (const auto& o : ann.outcomes) {
                json train_obj = {{"text", units[o.unit_index].text},
                                  {"label", std::string(1, o.label)}};
                train_lines.push_back(train_obj.dump());

                json audit = {{"record_id", o.record_id},
                              {"unit_index", o.unit_index},
                              {"label", std::string(1, o.label)},
                              {"strategy", o.strategy == AnnotationStrategy::S1 ? "S1" : "S2"},
                              {"full_diag", o.full_diag}};
                if (o.masked_diag) audit["masked_diag"] = *o.masked_diag;
                if (o.probe_hit) audit["probe_hit"] = *o.probe_hit;
                audit_lines.push_back(audit.dump());
            }
        } catch (const Error& e) {
            ++failed_records;
            std::fprintf(stderr, "annotate: record %s failed: %s\n", record.id.c_str(), e.what());
        }
    }

    write_lines(out_path, train_lines);
    if (!audit_path.empty()) write_lines(audit_path, audit_lines);
    std::printf("annotated %zu records -> %zu training examples (%zu units skipped, %zu records failed)\n",
                records.size() - failed_records, train_lines.size(), skipped_total, failed_records);
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& out_path,
              const std::string& config_path) {
    auto config = load_config(config_path);
    auto examples = load_training(data_path);
    auto model = LinearClassifier::train(examples, config.classifier.space, config.classifier.hyper);
    model.save(out_path);
    std::printf("trained on %zu examples (A=%llu B=%llu C=%llu), train accuracy %.4f -> %s\n",
                examples.size(),
                static_cast<unsigned long long>(model.stats().label_counts[0]),
                static_cast<unsigned long long>(model.stats().label_counts[1]),
                static_cast<unsigned long long>(model.stats().label_counts[2]),
                model.stats().final_train_accuracy, out_path.c_str());
    return 0;
}

int cmd_diagnose(const std::string& in_path, const std::string& text,
                 const std::string& config_path, const std::string& index_path,
                 const std::string& model_path, const std::string& out_path,
                 const std::string& policy_name) {
    auto config = load_config(config_path);
    std::vector<EmrRecord> records;
    if (!text.empty()) {
        records.push_back({"cli", text, ""});
    } else if (!in_path.empty()) {
        records = load_emr(in_path, /*require_reference=*/false);
    } else {
        raise(Errc::ConfigError, "diagnose: pass --in <jsonl> or --text <record>");
    }

    auto classifier = make_classifier(config, model_path);
    std::shared_ptr<KnowledgeIndex> ki;
    if (!index_path.empty())
        ki = std::make_shared<KnowledgeIndex>(KnowledgeIndex::load(index_path));
    auto gateway = make_gateway(config.gateway);

    Pipeline pipeline(config, classifier, ki, gateway);
    auto [outcomes, summary] = pipeline.run_batch(records, parse_policy(policy_name));

    std::vector<std::string> lines;
    for (const auto& o : outcomes) lines.push_back(o.to_json().dump());
    if (out_path.empty()) {
        for (const auto& l : lines) std::printf("%s\n", l.c_str());
    } else {
        write_lines(out_path, lines);
    }
    std::fprintf(stderr, "%s\n", summary.to_json().dump().c_str());
    return summary.failures == records.size() && !records.empty() ? 3 : 0;
}

int cmd_eval(const std::string& pred_path, const std::string& ref_path,
             const std::string& term_path, const std::string& out_path,
             const std::string& csv_path, double threshold) {
    auto terminology = load_terminology(term_path);
    auto refs = load_emr(ref_path, /*require_reference=*/true);

    std::map<std::string, std::string> predictions;
    for (const auto& [line_no, obj] : read_jsonl(pred_path)) {
        if (!obj.contains("id"))
            raise(Errc::DataError, pred_path + ":" + std::to_string(line_no) + ": missing id");
        std::string diag;
        if (obj.contains("diagnosis"))
            diag = obj.at("diagnosis").get<std::string>();
        else if (obj.contains("final_diagnosis"))
            diag = obj.at("final_diagnosis").get<std::string>();
        else
            raise(Errc::DataError, pred_path + ":" + std::to_string(line_no) + ": missing diagnosis");
        predictions[obj.at("id").get<std::string>()] = diag;
    }

    std::vector<RecordEval> evals;
    for (const auto& ref : refs) {
        auto it = predictions.find(ref.id);
        if (it == predictions.end()) continue;
        auto ref_set = link(extract_mentions(ref.reference_diagnosis), terminology, threshold);
        if (ref_set.codes.empty())
            raise(Errc::DataError, "record " + ref.id + ": reference links to no terminology code");
        auto pred_set = link(extract_mentions(it->second), terminology, threshold);

        RecordEval re;
        re.id = ref.id;
        re.per_record = metrics(pred_set, ref_set);
        re.pred_size = pred_set.codes.size();
        re.ref_size = ref_set.codes.size();
        for (const auto& code : pred_set.codes) re.intersection += ref_set.codes.count(code);
        evals.push_back(std::move(re));
    }
    if (evals.empty()) raise(Errc::DataError, "eval: no prediction/reference pairs joined by id");

    auto corpus = aggregate(evals);
    json out = {{"precision", corpus.precision},
                {"recall", corpus.recall},
                {"f1", corpus.f1},
                {"records", corpus.n_records},
                {"averaging", "micro"}};
    if (out_path.empty()) {
        std::printf("%s\n", out.dump(2).c_str());
    } else {
        write_text(out_path, out.dump(2) + "\n");
    }

    if (!csv_path.empty()) {
        std::string csv = "id,precision,recall,f1,intersection,pred_size,ref_size\n";
        for (const auto& re : evals)
            csv += re.id + "," + std::to_string(re.per_record.precision) + "," +
                   std::to_string(re.per_record.recall) + "," + std::to_string(re.per_record.f1) +
                   "," + std::to_string(re.intersection) + "," + std::to_string(re.pred_size) +
                   "," + std::to_string(re.ref_size) + "\n";
        write_text(csv_path, csv);
    }
    return 0;
}

int cmd_bench(const std::string& in_path, const std::string& config_path,
              const std::string& index_path, const std::string& model_path,
              const std::string& policy_name, const std::string& out_path) {
    auto config = load_config(config_path);
    auto records = load_emr(in_path, /*require_reference=*/false);
    auto classifier = make_classifier(config, model_path);
    std::shared_ptr<KnowledgeIndex> ki;
    if (!index_path.empty())
        ki = std::make_shared<KnowledgeIndex>(KnowledgeIndex::load(index_path));
    auto gateway = make_gateway(config.gateway);
    Pipeline pipeline(config, classifier, ki, gateway);

    std::vector<RoutePolicy> policies;
    if (policy_name == "all") {
        policies = {RoutePolicy::Adaptive, RoutePolicy::AlwaysRetrieve, RoutePolicy::NeverRetrieve};
    } else {
        policies = {parse_policy(policy_name)};
    }

    auto rows = pipeline.bench(records, policies);
    auto csv = bench_csv(rows);
    if (out_path.empty()) {
        std::printf("%s", csv.c_str());
    } else {
        write_text(out_path, csv);
        std::printf("wrote %zu policy rows -> %s\n", rows.size(), out_path.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive retrieval-augmented diagnosis pipeline"};
    app.require_subcommand(1);

    std::string kb_path, emr_path, term_path, out_path, config_path, index_path, model_path;
    std::string in_path, text, audit_path, pred_path, ref_path, csv_path;
    std::string policy = "adaptive";
    double threshold = 0.5;

    auto* ingest = app.add_subcommand("ingest", "validate KB/EMR/terminology files");
    ingest->add_option("--kb", kb_path, "knowledge base JSONL");
    ingest->add_option("--emr", emr_path, "EMR records JSONL");
    ingest->add_option("--terminology", term_path, "terminology JSONL");

    auto* index = app.add_subcommand("index", "build the chunk-level BM25 index");
    index->add_option("--kb", kb_path, "knowledge base JSONL")->required();
    index->add_option("--out", out_path, "output index file")->required();
    index->add_option("--config", config_path, "pipeline config JSON");

    auto* annotate = app.add_subcommand("annotate", "produce classifier training labels by masking");
    annotate->add_option("--emr", emr_path, "EMR records JSONL (with reference_diagnosis)")->required();
    annotate->add_option("--kb-index", index_path, "knowledge index file")->required();
    annotate->add_option("--out", out_path, "training JSONL output")->required();
    annotate->add_option("--audit", audit_path, "audit JSONL output");
    annotate->add_option("--config", config_path, "pipeline config JSON");

    auto* train = app.add_subcommand("train", "train the unit importance classifier");
    train->add_option("--data", in_path, "training JSONL")->required();
    train->add_option("--out", out_path, "model file output")->required();
    train->add_option("--config", config_path, "pipeline config JSON");

    auto* diagnose = app.add_subcommand("diagnose", "run the adaptive pipeline");
    diagnose->add_option("--in", in_path, "EMR records JSONL");
    diagnose->add_option("--text", text, "diagnose a single record from the command line");
    diagnose->add_option("--config", config_path, "pipeline config JSON");
    diagnose->add_option("--kb-index", index_path, "knowledge index file");
    diagnose->add_option("--model", model_path, "classifier model file");
    diagnose->add_option("--out", out_path, "outcome JSONL output (stdout when omitted)");
    diagnose->add_option("--policy", policy, "adaptive|always|never");

    auto* evaluate = app.add_subcommand("eval", "set-level precision/recall/F1 against references");
    evaluate->add_option("--pred", pred_path, "predictions JSONL {id, diagnosis}")->required();
    evaluate->add_option("--ref", ref_path, "reference EMR JSONL")->required();
    evaluate->add_option("--terminology", term_path, "terminology JSONL")->required();
    evaluate->add_option("--out", out_path, "metrics JSON output (stdout when omitted)");
    evaluate->add_option("--csv", csv_path, "per-record CSV output");
    evaluate->add_option("--threshold", threshold, "fuzzy linking threshold (default 0.5)");

    auto* bench = app.add_subcommand("bench", "compare routing policies on call counts");
    bench->add_option("--in", in_path, "EMR records JSONL")->required();
    bench->add_option("--config", config_path, "pipeline config JSON");
    bench->add_option("--kb-index", index_path, "knowledge index file");
    bench->add_option("--model", model_path, "classifier model file");
    bench->add_option("--policy", policy, "adaptive|always|never|all");
    bench->add_option("--out", out_path, "CSV output (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return cmd_ingest(kb_path, emr_path, term_path);
        if (*index) return cmd_index(kb_path, out_path, config_path);
        if (*annotate) return cmd_annotate(emr_path, index_path, out_path, audit_path, config_path);
        if (*train) return cmd_train(in_path, out_path, config_path);
        if (*diagnose)
            return cmd_diagnose(in_path, text, config_path, index_path, model_path, out_path, policy);
        if (*evaluate) return cmd_eval(pred_path, ref_path, term_path, out_path, csv_path, threshold);
        if (*bench) return cmd_bench(in_path, config_path, index_path, model_path, policy, out_path);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
