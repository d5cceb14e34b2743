#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace arag {

enum class TemplateKind : std::uint8_t { Diag, Diff, Rag };

// Prompt template with {placeholder} markers. diag uses {patient}; diff uses
// {patient} and {document}; rag uses {patient} and {documents}.
struct PromptTemplate {
    TemplateKind kind = TemplateKind::Diag;
    std::string body;

    static PromptTemplate builtin(TemplateKind kind);
    static PromptTemplate from_file(TemplateKind kind, const std::string& path);
};

// Substitutes every {name} in the body; throws MissingBinding naming the
// first placeholder without a binding.
std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings);

// Separator between documents in the rag prompt's {documents} block.
inline constexpr std::string_view kDocumentSeparator = "\n---\n";

struct LlmRequest {
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string tag; // free-form trace label
};

enum class LlmBackendKind : std::uint8_t { Http, Mock };

struct LlmResponse {
    std::string text;
    std::int64_t latency_ms = 0;
    LlmBackendKind backend = LlmBackendKind::Mock;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual LlmResponse complete(const LlmRequest& request) = 0;
    virtual LlmBackendKind kind() const = 0;
};

// Deterministic scripted backend: ordered (substring pattern -> response)
// rules, first match wins, optional default. Lock-free after construction.
struct MockRule {
    std::string pattern;
    std::string response;
};

class MockLlmClient final : public LlmClient {
public:
    MockLlmClient(std::vector<MockRule> rules, std::optional<std::string> default_response = {});

    static std::vector<MockRule> load_rules(const std::string& path); // JSONL {"pattern","response"}

    LlmResponse complete(const LlmRequest& request) override;
    LlmBackendKind kind() const override { return LlmBackendKind::Mock; }

    std::uint64_t calls() const { return calls_.load(); }

private:
    std::vector<MockRule> rules_;
    std::optional<std::string> default_response_;
    std::atomic<std::uint64_t> calls_{0};
};

struct HttpLlmConfig {
    std::string endpoint;                    // e.g. http://localhost:8080/v1/chat/completions
    std::string model = "default";
    std::string api_key_env = "ARAG_API_KEY"; // bearer token read from this env var
    int timeout_ms = 30000;
    int max_retries = 2;       // retries on 5xx/429/transport errors
    int backoff_base_ms = 250; // doubles per retry
};

// Chat-completion-shaped HTTP backend. Sends
// {model, messages:[{role:"user",content:prompt}], temperature, max_tokens}.
class HttpLlmClient final : public LlmClient {
public:
    explicit HttpLlmClient(HttpLlmConfig config);

    LlmResponse complete(const LlmRequest& request) override;
    LlmBackendKind kind() const override { return LlmBackendKind::Http; }

private:
    HttpLlmConfig config_;
    std::string api_key_;
};

// Shared access point: enforces the in-flight cap and counts calls. Shareable
// across worker threads.
class LlmGateway {
public:
    LlmGateway(std::shared_ptr<LlmClient> client, int max_concurrent = 4);

    LlmResponse complete(const LlmRequest& request);

    std::uint64_t total_calls() const { return calls_.load(); }
    LlmClient& client() { return *client_; }

private:
    std::shared_ptr<LlmClient> client_;
    int max_concurrent_;
    int in_flight_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
    std::atomic<std::uint64_t> calls_{0};
};

} // namespace arag
