#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace esd {

/// Text-completion contract used by query understanding and reranking.
/// Implementations either return text or throw ProviderError; they never
/// return partial state.
class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

/// Key under which StubLlmProvider stores a prompt: FNV-1a 64 of the exact
/// prompt bytes as 16 lowercase hex digits.
std::string prompt_key(std::string_view prompt);

/// Substitutes every "{name}" placeholder in `tmpl`. Other braces are left
/// untouched so JSON examples inside templates survive.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values);

/// Deterministic table-driven fake keyed by prompt_key. Unknown prompts get
/// the fallback reply when one is configured, else a ProviderError.
class StubLlmProvider : public LlmProvider {
public:
    StubLlmProvider() = default;
    StubLlmProvider(StubLlmProvider&& other) noexcept
        : replies_(std::move(other.replies_)),
          fallback_(std::move(other.fallback_)),
          calls_(other.calls_.load()) {}

    void set_reply(std::string_view prompt, std::string reply);
    void set_reply_for_key(std::string key, std::string reply);
    void set_fallback(std::string reply) { fallback_ = std::move(reply); }

    std::string complete(const std::string& prompt) override;
    std::size_t calls() const { return calls_.load(); }

    /// JSON object {"<prompt_key>": "<reply>", ..., "*": "<fallback>"}.
    static StubLlmProvider from_json(std::string_view json_text);
    static StubLlmProvider load(const std::filesystem::path& path);

private:
    std::map<std::string, std::string> replies_;
    std::optional<std::string> fallback_;
    std::atomic<std::size_t> calls_{0};
};

/// Always throws ProviderError; exercises every fallback path.
class FailingLlmProvider : public LlmProvider {
public:
    std::string complete(const std::string& prompt) override;
    std::size_t calls() const { return calls_.load(); }

private:
    std::atomic<std::size_t> calls_{0};
};

struct HttpSettings {
    std::string endpoint;  // full URL, http:// or https://
    std::string api_key;   // sent as "Authorization: Bearer <key>" when nonempty
    std::chrono::seconds timeout{60};
};

/// POSTs a JSON body and returns the response body. Transport failures and
/// non-2xx statuses become ProviderError carrying the cause.
std::string http_post_json(const HttpSettings& settings, const std::string& body);

/// OpenAI-style chat-completions client: sends {"model", "messages":[{"role":
/// "user","content": prompt}], "temperature": 0} and reads
/// choices[0].message.content.
class HttpLlmProvider : public LlmProvider {
public:
    HttpLlmProvider(HttpSettings settings, std::string model)
        : settings_(std::move(settings)), model_(std::move(model)) {}

    std::string complete(const std::string& prompt) override;

private:
    HttpSettings settings_;
    std::string model_;
};

}  // namespace esd
