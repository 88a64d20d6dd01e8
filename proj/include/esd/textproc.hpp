#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace esd {

/// Ordered lowercase tokens; never contains empty tokens.
using TokenStream = std::vector<std::string>;

/// Splits on every non-alphanumeric (ASCII) byte and lowercases. Digits are
/// kept; no stemming and no stop words.
TokenStream tokenize(std::string_view text);

/// Abbreviation -> full-form table. Keys are 2-10 characters drawn from
/// [A-Z0-9]; values are nonempty and differ from their key.
class AbbrDict {
public:
    AbbrDict() = default;

    /// Throws DataError when the entry breaks the key/value invariants.
    void add(std::string_view abbreviation, std::string_view full_form);

    const std::string* full_form(std::string_view abbreviation) const;
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

    static AbbrDict defaults();
    static AbbrDict from_json(std::string_view json_text);
    static AbbrDict load(const std::filesystem::path& path);

private:
    std::map<std::string, std::string, std::less<>> entries_;
    std::size_t max_key_length_ = 0;
};

struct AbbrOccurrence {
    std::size_t offset = 0;
    std::string abbreviation;

    bool operator==(const AbbrOccurrence&) const = default;
};

/// Every delimited, case-sensitive occurrence of a dictionary key in text
/// order. Occurrences already followed by "(<full form>" are skipped, as are
/// keys that sit inside such an inserted expansion.
std::vector<AbbrOccurrence> detect_abbreviations(std::string_view text, const AbbrDict& dict);

/// Inserts " (<full form>)" after the first occurrence of each detected
/// abbreviation. An abbreviation that already carries its expansion somewhere
/// in the text is left alone, which makes the operation idempotent.
std::string expand_abbreviations(std::string_view text, const AbbrDict& dict);

}  // namespace esd
