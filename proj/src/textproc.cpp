#include "esd/textproc.hpp"

#include <set>

#include <json.hpp>

#include "esd/assets.hpp"
#include "esd/error.hpp"
#include "util.hpp"

namespace esd {

TokenStream tokenize(std::string_view text) {
    TokenStream out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !detail::is_alnum(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && detail::is_alnum(text[i])) ++i;
        if (i > start) out.push_back(detail::to_lower(text.substr(start, i - start)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// AbbrDict

void AbbrDict::add(std::string_view abbreviation, std::string_view full_form) {
    const std::string key(abbreviation);
    if (key.size() < 2 || key.size() > 10)
        throw DataError("abbreviation '" + key + "' must be 2-10 characters");
    for (char c : key) {
        if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')))
            throw DataError("abbreviation '" + key + "' may contain only A-Z and 0-9");
    }
    if (detail::trim(full_form).empty())
        throw DataError("abbreviation '" + key + "' has an empty full form");
    if (full_form == abbreviation) throw DataError("abbreviation '" + key + "' maps to itself");
    entries_[key] = std::string(full_form);
    max_key_length_ = std::max(max_key_length_, key.size());
}

const std::string* AbbrDict::full_form(std::string_view abbreviation) const {
    if (abbreviation.size() > max_key_length_) return nullptr;
    auto it = entries_.find(abbreviation);
    return it == entries_.end() ? nullptr : &it->second;
}

AbbrDict AbbrDict::from_json(std::string_view json_text) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("abbreviation dictionary: malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw DataError("abbreviation dictionary: expected a JSON object");
    AbbrDict dict;
    for (const auto& [key, value] : obj.items()) {
        if (!value.is_string())
            throw DataError("abbreviation dictionary: value for '" + key + "' must be a string");
        dict.add(key, value.get<std::string>());
    }
    return dict;
}

AbbrDict AbbrDict::load(const std::filesystem::path& path) {
    return from_json(detail::read_file(path));
}

AbbrDict AbbrDict::defaults() { return from_json(asset("abbreviations.json")); }

// ---------------------------------------------------------------------------
// Detection and expansion

namespace {

struct KeyHit {
    std::size_t offset;
    std::size_t length;
    const std::string* full;
    bool expanded;  // already followed by "(<full form>"
};

// Scans delimited dictionary keys. Keys inside an existing expansion
// parenthetical are dropped entirely.
std::vector<KeyHit> scan_keys(std::string_view text, const AbbrDict& dict) {
    std::vector<KeyHit> hits;
    std::size_t shadow_end = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !detail::is_alnum(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && detail::is_alnum(text[i])) ++i;
        if (i == start || start < shadow_end) continue;
        const std::string* full = dict.full_form(text.substr(start, i - start));
        if (!full) continue;

        std::size_t p = i;
        while (p < text.size() && detail::is_space(text[p])) ++p;
        bool expanded = false;
        if (p < text.size() && text[p] == '(' && text.substr(p + 1, full->size()) == *full) {
            expanded = true;
            shadow_end = p + 1 + full->size();
            if (shadow_end < text.size() && text[shadow_end] == ')') ++shadow_end;
        }
        hits.push_back({start, i - start, full, expanded});
    }
    return hits;
}

}  // namespace

std::vector<AbbrOccurrence> detect_abbreviations(std::string_view text, const AbbrDict& dict) {
    std::vector<AbbrOccurrence> out;
    for (const auto& hit : scan_keys(text, dict)) {
        if (!hit.expanded)
            out.push_back({hit.offset, std::string(text.substr(hit.offset, hit.length))});
    }
    return out;
}

std::string expand_abbreviations(std::string_view text, const AbbrDict& dict) {
    if (dict.empty()) return std::string(text);
    const auto hits = scan_keys(text, dict);

    std::set<std::string_view> handled;
    for (const auto& hit : hits)
        if (hit.expanded) handled.insert(text.substr(hit.offset, hit.length));

    std::string out;
    out.reserve(text.size() + 64);
    std::size_t copied = 0;
    for (const auto& hit : hits) {
        const auto key = text.substr(hit.offset, hit.length);
        if (!handled.insert(key).second) continue;
        const std::size_t end = hit.offset + hit.length;
        out.append(text.substr(copied, end - copied));
        out += " (";
        out += *hit.full;
        out += ')';
        copied = end;
    }
    out.append(text.substr(copied));
    return out;
}

}  // namespace esd
