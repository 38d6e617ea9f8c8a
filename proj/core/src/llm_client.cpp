#include "ssn/llm_client.hpp"

#include "http_util.hpp"
#include "ssn/errors.hpp"
#include "ssn/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

namespace ssn {

namespace {

using ordered_json = nlohmann::ordered_json;

struct FewShot {
    std::string question;
    std::vector<bool> labels;
};

struct PromptView {
    std::size_t count = 20;
    std::vector<std::string> label_names;
    std::vector<FewShot> examples;
};

// Recovers the requested count and the few-shot items from a prompt built by
// build_prompt. Unknown text is ignored.
PromptView read_prompt(const std::string& prompt) {
    PromptView view;
    static const std::regex count_re(R"(generate (\d+) new samples)");
    std::smatch m;
    if (std::regex_search(prompt, m, count_re)) view.count = std::stoul(m[1].str());

    std::istringstream lines(prompt);
    std::string line;
    bool in_examples = false;
    while (std::getline(lines, line)) {
        if (line == "Few-shot Samples") {
            in_examples = true;
            continue;
        }
        if (!in_examples || line.empty() || line.front() != '{') continue;
        const auto item = ordered_json::parse(line, nullptr, false);
        if (item.is_discarded() || !item.is_object() || !item.contains("question")) continue;
        FewShot ex;
        ex.question = item["question"].get<std::string>();
        std::vector<std::string> names;
        for (const auto& [key, value] : item.items()) {
            if (!value.is_boolean()) continue;
            names.push_back(key);
            ex.labels.push_back(value.get<bool>());
        }
        if (view.label_names.empty()) view.label_names = names;
        if (names != view.label_names) continue;
        view.examples.push_back(std::move(ex));
    }
    return view;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : " ") + p;
    return out;
}

}  // namespace

std::vector<CompletionOutcome> complete_all(LlmClient& client, std::span<const std::string> prompts,
                                            std::size_t max_in_flight) {
    std::vector<CompletionOutcome> out(prompts.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(max_in_flight, prompts.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < prompts.size(); i = next++) {
            try {
                out[i].response = client.complete(prompts[i]);
            } catch (const std::exception& e) {
                out[i].error = e.what();
            }
        }
    };
    if (workers == 1) {
        work();
        return out;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    return out;
}

StubLlmClient::StubLlmClient(StubLlmConfig config) : config_(config) {
    if (!(config_.noise >= 0.0 && config_.noise <= 1.0)) throw ConfigError("augment.stub_noise must be in [0, 1]");
}

std::string StubLlmClient::identity() const { return "stub-llm-v1"; }

ChatResponse StubLlmClient::complete(const std::string& prompt) {
    const std::uint64_t key = fnv1a64(prompt) ^ config_.seed;
    ChatResponse resp;
    resp.id = "stub-" + hex64(key);
    const auto view = read_prompt(prompt);
    if (view.examples.empty()) {
        resp.content = "I can only generate new samples from few-shot examples.";
        return resp;
    }
    std::mt19937_64 rng(key);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t C = view.label_names.size();
    std::vector<std::size_t> order(view.examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    ordered_json items = ordered_json::array();
    for (std::size_t j = 0; j < view.count; ++j) {
        const auto& base = view.examples[order[j % order.size()]];
        auto labels = base.labels;
        if (C > 1 && std::all_of(labels.begin(), labels.end(), [](bool b) { return b; }))
            labels[std::uniform_int_distribution<std::size_t>(0, C - 1)(rng)] = false;

        // Borrow one sentence from another example with the same label vector,
        // so every added cue still agrees with the claimed label.
        auto sentences = split_sentences(base.question);
        std::vector<std::size_t> donors;
        for (std::size_t e = 0; e < view.examples.size(); ++e)
            if (&view.examples[e] != &base && view.examples[e].labels == labels) donors.push_back(e);
        if (!donors.empty()) {
            const auto donor = split_sentences(
                view.examples[donors[std::uniform_int_distribution<std::size_t>(0, donors.size() - 1)(rng)]].question);
            const auto& piece = donor[std::uniform_int_distribution<std::size_t>(0, donor.size() - 1)(rng)];
            if (std::find(sentences.begin(), sentences.end(), piece) == sentences.end()) sentences.push_back(piece);
        }
        std::shuffle(sentences.begin(), sentences.end(), rng);

        if (unit(rng) < config_.noise) {
            const auto c = std::uniform_int_distribution<std::size_t>(0, C - 1)(rng);
            labels[c] = !labels[c];
            if (C > 1 && std::all_of(labels.begin(), labels.end(), [](bool b) { return b; })) labels[c] = false;
        }
        ordered_json item;
        if (unit(rng) < config_.noise / 4.0) {
            item["text"] = join(sentences);  // wrong key: a malformed item
        } else {
            item["question"] = join(sentences);
            for (std::size_t c = 0; c < C; ++c) item[view.label_names[c]] = static_cast<bool>(labels[c]);
        }
        items.push_back(std::move(item));
    }
    resp.content = "```json\n" + items.dump(2) + "\n```";
    return resp;
}

HttpChatClient::HttpChatClient(HttpChatConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(kLlmApiKeyEnv);
    if (key == nullptr || *key == '\0')
        throw ConfigError(std::string(kLlmApiKeyEnv) + " is not set; the openai augmentation backend needs an API key");
    api_key_ = key;
    if (const char* url = std::getenv(kLlmBaseUrlEnv); url != nullptr && *url != '\0') config_.base_url = url;
    detail::split_url(config_.base_url);
    if (config_.model.empty()) throw ConfigError("augment.model must not be empty");
}

std::string HttpChatClient::identity() const { return "openai-chat:" + config_.model; }

std::string HttpChatClient::redact(std::string text) const {
    if (api_key_.empty()) return text;
    for (auto pos = text.find(api_key_); pos != std::string::npos; pos = text.find(api_key_, pos + 3))
        text.replace(pos, api_key_.size(), "***");
    return text;
}

void HttpChatClient::audit(const std::string& request, int status, const std::string& response, std::size_t attempt) {
    if (config_.audit_log.empty()) return;
    ordered_json rec;
    rec["attempt"] = attempt;
    rec["url"] = config_.base_url + "/chat/completions";
    rec["authorization"] = "Bearer ***";
    rec["status"] = status;
    rec["request"] = redact(request);
    rec["response"] = redact(response);
    std::lock_guard lock(audit_mutex_);
    std::ofstream out(config_.audit_log, std::ios::app);
    if (!out) throw IoError("cannot append to audit log '" + config_.audit_log + "'");
    out << rec.dump() << "\n";
}

ChatResponse HttpChatClient::complete(const std::string& prompt) {
    ordered_json req;
    req["model"] = config_.model;
    req["messages"] = ordered_json::array({{{"role", "user"}, {"content", prompt}}});
    req["temperature"] = config_.temperature;
    const std::string body = req.dump();
    const detail::Headers headers = {{"Authorization", "Bearer " + api_key_}};

    std::string last_error;
    for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
        const auto r = detail::post_json(config_.base_url, "/chat/completions", body, headers, config_.timeout);
        audit(body, r.status, r.status == 0 ? r.error : r.body, attempt);
        if (r.status == 200) {
            const auto doc = ordered_json::parse(r.body, nullptr, false);
            if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
                doc["choices"].empty())
                throw BackendError("chat completion response has no choices");
            const auto& msg = doc["choices"][0];
            if (!msg.contains("message") || !msg["message"].contains("content") ||
                !msg["message"]["content"].is_string())
                throw BackendError("chat completion response has no message content");
            ChatResponse out;
            out.content = msg["message"]["content"].get<std::string>();
            out.id = doc.contains("id") && doc["id"].is_string() ? doc["id"].get<std::string>()
                                                                  : "resp-" + hex64(fnv1a64(r.body));
            return out;
        }
        const bool retryable = r.status == 0 || r.status == 429 || r.status >= 500;
        last_error = r.status == 0 ? "connection failed: " + r.error
                                   : "HTTP " + std::to_string(r.status) + ": " + redact(r.body.substr(0, 200));
        if (!retryable) throw BackendError("chat completion failed, " + last_error);
        if (attempt < config_.max_retries) std::this_thread::sleep_for(config_.backoff * (1LL << attempt));
    }
    throw BackendError("chat completion failed after " + std::to_string(config_.max_retries + 1) +
                       " attempts, last error " + last_error);
}

}  // namespace ssn
