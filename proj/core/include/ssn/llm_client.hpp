#pragma once

// Chat-completion port used by augmentation. The stub answers offline and
// deterministically; the HTTP client speaks the OpenAI-compatible wire format.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssn {

inline constexpr const char* kLlmApiKeyEnv = "SSN_LLM_API_KEY";
inline constexpr const char* kLlmBaseUrlEnv = "SSN_LLM_BASE_URL";

struct ChatResponse {
    std::string id;
    std::string content;
};

// Implementations must be safe to call from several threads at once.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual ChatResponse complete(const std::string& prompt) = 0;
    virtual std::string identity() const = 0;
};

struct CompletionOutcome {
    std::optional<ChatResponse> response;
    std::string error;  // set when response is empty
};

// Runs every prompt with at most `max_in_flight` concurrent requests. Results
// keep prompt order; a failed prompt records its error instead of aborting
// the others.
std::vector<CompletionOutcome> complete_all(LlmClient& client, std::span<const std::string> prompts,
                                            std::size_t max_in_flight);

struct StubLlmConfig {
    // Share of generated items whose claimed label is perturbed, so the
    // selection stage has hallucinations to reject.
    double noise = 0.15;
    std::uint64_t seed = 42;
};

// Template generator: recombines the few-shot questions found in the prompt
// into the requested number of new items. Output depends only on the prompt
// bytes and the seed.
class StubLlmClient final : public LlmClient {
public:
    explicit StubLlmClient(StubLlmConfig config = {});
    ChatResponse complete(const std::string& prompt) override;
    std::string identity() const override;

private:
    StubLlmConfig config_;
};

struct HttpChatConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4o";
    double temperature = 1.0;
    std::size_t max_retries = 3;
    std::chrono::milliseconds timeout{60000};
    std::chrono::milliseconds backoff{500};  // doubled after every failed attempt
    std::string audit_log;                   // JSONL path; empty disables auditing
};

// POST {base_url}/chat/completions. Retries on connection failures, 429 and
// 5xx; other statuses fail at once. The bearer token comes from
// SSN_LLM_API_KEY and never reaches the audit log.
class HttpChatClient final : public LlmClient {
public:
    // Throws ConfigError when SSN_LLM_API_KEY is unset or empty.
    explicit HttpChatClient(HttpChatConfig config);
    ChatResponse complete(const std::string& prompt) override;
    std::string identity() const override;

private:
    void audit(const std::string& request, int status, const std::string& response, std::size_t attempt);
    std::string redact(std::string text) const;

    HttpChatConfig config_;
    std::string api_key_;
    std::mutex audit_mutex_;
};

}  // namespace ssn
