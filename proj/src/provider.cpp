#include "esd/provider.hpp"

#include <cstdio>

#include <json.hpp>

#include "esd/error.hpp"
#include "util.hpp"

namespace esd {

using nlohmann::json;

std::string prompt_key(std::string_view prompt) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(prompt)));
    return buf;
}

std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        bool substituted = false;
        if (tmpl[i] == '{') {
            for (const auto& [name, value] : values) {
                const std::size_t len = name.size() + 2;
                if (tmpl.substr(i, len).size() == len && tmpl[i + len - 1] == '}' &&
                    tmpl.substr(i + 1, name.size()) == name) {
                    out += value;
                    i += len;
                    substituted = true;
                    break;
                }
            }
        }
        if (!substituted) out += tmpl[i++];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stub / failing

void StubLlmProvider::set_reply(std::string_view prompt, std::string reply) {
    replies_[prompt_key(prompt)] = std::move(reply);
}

void StubLlmProvider::set_reply_for_key(std::string key, std::string reply) {
    replies_[std::move(key)] = std::move(reply);
}

std::string StubLlmProvider::complete(const std::string& prompt) {
    ++calls_;
    if (auto it = replies_.find(prompt_key(prompt)); it != replies_.end()) return it->second;
    if (fallback_) return *fallback_;
    throw ProviderError("stub provider has no reply for prompt " + prompt_key(prompt));
}

StubLlmProvider StubLlmProvider::from_json(std::string_view json_text) {
    json obj;
    try {
        obj = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("stub provider table: malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw DataError("stub provider table: expected a JSON object");
    StubLlmProvider stub;
    for (const auto& [key, value] : obj.items()) {
        if (!value.is_string())
            throw DataError("stub provider table: reply for '" + key + "' must be a string");
        if (key == "*")
            stub.set_fallback(value.get<std::string>());
        else
            stub.set_reply_for_key(key, value.get<std::string>());
    }
    return stub;
}

StubLlmProvider StubLlmProvider::load(const std::filesystem::path& path) {
    return from_json(detail::read_file(path));
}

std::string FailingLlmProvider::complete(const std::string&) {
    ++calls_;
    throw ProviderError("provider unavailable");
}

// ---------------------------------------------------------------------------
// HTTP chat completions

std::string HttpLlmProvider::complete(const std::string& prompt) {
    json body = {{"model", model_},
                 {"temperature", 0},
                 {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
    const auto reply = http_post_json(settings_, body.dump());
    try {
        auto doc = json::parse(reply);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unexpected completion response: ") + e.what());
    }
}

}  // namespace esd
