#include "arag/llm.hpp"

#include "arag/errors.hpp"
#include "arag/http.hpp"
#include "arag/io.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace arag {

namespace {

// Prompt bodies are original to this project; edit the shipped template files
// to change wording without rebuilding.
constexpr std::string_view kDiagBody =
    "You are an experienced clinician. Read the patient record below and state the most likely "
    "diagnosis. Answer with a line starting with \"Diagnosis:\" followed by the disease name(s), "
    "separated by commas if more than one.\n\nPatient record:\n{patient}\n";

constexpr std::string_view kDiffBody =
    "You are performing a differential diagnosis check. Compare the patient record with the "
    "reference document below. If the document describes a condition consistent with the patient's "
    "findings and would help diagnose this case, answer with the single token SUPPORT. If the "
    "document conflicts with the findings or is irrelevant, answer with the single token EXCLUDE. "
    "You may add a short rationale after the token.\n\nPatient record:\n{patient}\n\nDocument:\n{document}\n";

constexpr std::string_view kRagBody =
    "You are an experienced clinician. Using the patient record and the reference documents below, "
    "state the most likely diagnosis. Answer with a line starting with \"Diagnosis:\" followed by "
    "the disease name(s), separated by commas if more than one.\n\nPatient record:\n{patient}\n\n"
    "Reference documents:\n{documents}\n";

} // namespace

PromptTemplate PromptTemplate::builtin(TemplateKind kind) {
    PromptTemplate t;
    t.kind = kind;
    switch (kind) {
    case TemplateKind::Diag: t.body = kDiagBody; break;
    case TemplateKind::Diff: t.body = kDiffBody; break;
    case TemplateKind::Rag: t.body = kRagBody; break;
    }
    return t;
}

PromptTemplate PromptTemplate::from_file(TemplateKind kind, const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::IoFailure, "cannot open template file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    PromptTemplate t;
    t.kind = kind;
    t.body = ss.str();
    if (t.body.empty()) raise(Errc::ConfigError, "template file is empty: " + path);
    return t;
}

std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(tmpl.body.size());
    const std::string& body = tmpl.body;
    std::size_t pos = 0;
    while (pos < body.size()) {
        char c = body[pos];
        if (c != '{') {
            out.push_back(c);
            ++pos;
            continue;
        }
        // placeholder = '{' [a-z_]+ '}' ; anything else is literal text
        std::size_t end = pos + 1;
        while (end < body.size() && (std::islower(static_cast<unsigned char>(body[end])) || body[end] == '_'))
            ++end;
        if (end > pos + 1 && end < body.size() && body[end] == '}') {
            std::string name = body.substr(pos + 1, end - pos - 1);
            auto it = bindings.find(name);
            if (it == bindings.end())
                raise(Errc::MissingBinding, "render: no binding for placeholder \"" + name + "\"");
            out.append(it->second);
            pos = end + 1;
        } else {
            out.push_back(c);
            ++pos;
        }
    }
    return out;
}

MockLlmClient::MockLlmClient(std::vector<MockRule> rules, std::optional<std::string> default_response)
    : rules_(std::move(rules)), default_response_(std::move(default_response)) {}

std::vector<MockRule> MockLlmClient::load_rules(const std::string& path) {
    std::vector<MockRule> rules;
    for (const auto& [line_no, obj] : read_jsonl(path)) {
        if (!obj.contains("pattern") || !obj.contains("response"))
            raise(Errc::DataError,
                  path + ":" + std::to_string(line_no) + ": rule needs \"pattern\" and \"response\"");
        rules.push_back({obj.at("pattern").get<std::string>(), obj.at("response").get<std::string>()});
    }
    return rules;
}

LlmResponse MockLlmClient::complete(const LlmRequest& request) {
    calls_.fetch_add(1);
    for (const auto& rule : rules_) {
        if (request.prompt.find(rule.pattern) != std::string::npos)
            return {rule.response, 0, LlmBackendKind::Mock};
    }
    if (default_response_) return {*default_response_, 0, LlmBackendKind::Mock};
    raise(Errc::NoMatchingRule, "mock backend: no rule matches and no default configured (tag=" +
                                     request.tag + ")");
}

HttpLlmClient::HttpLlmClient(HttpLlmConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) raise(Errc::ConfigError, "http backend: endpoint not configured");
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

LlmResponse HttpLlmClient::complete(const LlmRequest& request) {
    nlohmann::json body = {
        {"model", config_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    const std::string payload = body.dump();

    auto started = std::chrono::steady_clock::now();
    int attempt = 0;
    for (;;) {
        try {
            std::string raw = http_post_json(config_.endpoint, payload, api_key_, config_.timeout_ms);
            nlohmann::json resp;
            try {
                resp = nlohmann::json::parse(raw);
            } catch (const nlohmann::json::exception& e) {
                raise(Errc::MalformedProviderPayload, std::string("provider sent invalid JSON: ") + e.what());
            }
            if (!resp.contains("choices") || !resp["choices"].is_array() || resp["choices"].empty())
                raise(Errc::MalformedProviderPayload, "provider response has no choices");
            const auto& msg = resp["choices"][0];
            if (!msg.contains("message") || !msg["message"].contains("content") ||
                !msg["message"]["content"].is_string())
                raise(Errc::MalformedProviderPayload, "provider response has no message content");
            auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();
            return {msg["message"]["content"].get<std::string>(), elapsed, LlmBackendKind::Http};
        } catch (const Error& e) {
            bool retryable = e.code() == Errc::Timeout ||
                             (e.code() == Errc::HttpStatus &&
                              (e.http_status() >= 500 || e.http_status() == 429 || e.http_status() == 408));
            if (!retryable || attempt >= config_.max_retries) throw;
            std::this_thread::sleep_for(
                std::chrono::milliseconds(config_.backoff_base_ms * (1 << attempt)));
            ++attempt;
        }
    }
}

LlmGateway::LlmGateway(std::shared_ptr<LlmClient> client, int max_concurrent)
    : client_(std::move(client)), max_concurrent_(max_concurrent) {
    if (!client_) raise(Errc::ConfigError, "gateway: no backend configured");
    if (max_concurrent_ < 1) raise(Errc::ConfigError, "gateway: max_concurrent must be >= 1");
}

LlmResponse LlmGateway::complete(const LlmRequest& request) {
    if (request.prompt.empty()) raise(Errc::EmptyInput, "gateway: empty prompt");
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return in_flight_ < max_concurrent_; });
        ++in_flight_;
    }
    calls_.fetch_add(1);
    try {
        LlmResponse r = client_->complete(request);
        {
            std::lock_guard lock(mu_);
            --in_flight_;
        }
        cv_.notify_one();
        return r;
    } catch (...) {
        {
            std::lock_guard lock(mu_);
            --in_flight_;
        }
        cv_.notify_one();
        throw;
    }
}

} // namespace arag
