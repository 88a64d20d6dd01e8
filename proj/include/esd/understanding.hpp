#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "esd/catalog.hpp"
#include "esd/dates.hpp"
#include "esd/provider.hpp"
#include "esd/textproc.hpp"

namespace esd {

enum class IntentType { TypeA, TypeB };
std::string_view to_string(IntentType t);

/// Whether a stage is driven by local rules or by an LLM provider.
enum class StageMode { Rules, Provider };
std::string_view to_string(StageMode m);
std::optional<StageMode> parse_stage_mode(std::string_view s);

struct QueryConstraints {
    std::optional<DateRange> temporal;
    std::optional<BBox> spatial;

    bool empty() const { return !temporal && !spatial; }
    bool operator==(const QueryConstraints&) const = default;
};

struct UnderstoodQuery {
    std::string original;
    IntentType intent = IntentType::TypeA;
    std::string rewritten;
    std::optional<std::string> rewrite_reasoning;
    QueryConstraints constraints;
    std::vector<std::string> warnings;

    bool operator==(const UnderstoodQuery&) const = default;
};

/// Platform, dataset and variable terms. A term matches a query when its
/// token sequence occurs contiguously in the query's tokens.
class Gazetteer {
public:
    Gazetteer() = default;
    explicit Gazetteer(const std::vector<std::string>& terms);

    void add(std::string_view term);
    bool matches(std::string_view query) const;
    /// First matching term, for diagnostics.
    std::optional<std::string> first_match(std::string_view query) const;
    /// Alphabetic single-word tokens of length >= 5, sorted; the spelling
    /// vocabulary.
    const std::vector<std::string>& vocabulary() const { return vocabulary_; }
    std::size_t size() const { return terms_.size(); }

    /// Accepts either a JSON array of terms or an object whose values are
    /// arrays of terms (e.g. {"platforms": [...], "variables": [...]}).
    static Gazetteer from_json(std::string_view json_text);
    static Gazetteer load(const std::filesystem::path& path);
    static Gazetteer defaults();

private:
    std::vector<std::pair<std::string, TokenStream>> terms_;
    std::vector<std::string> vocabulary_;
};

/// Research-topic trigger -> data variables, in file order.
class TopicMap {
public:
    TopicMap() = default;

    void add(std::string_view trigger, std::vector<std::string> terms);
    /// Variable terms of every topic triggered by the query, topics in map
    /// order, duplicates removed. Trigger tokens match as prefixes of
    /// consecutive query tokens ("flood" fires on "flooding").
    std::vector<std::string> expansions(std::string_view query,
                                        std::vector<std::string>* matched = nullptr) const;

    static TopicMap from_json(std::string_view json_text);
    static TopicMap load(const std::filesystem::path& path);
    static TopicMap defaults();

private:
    struct Topic {
        std::string trigger;
        TokenStream trigger_tokens;
        std::vector<std::string> terms;
    };
    std::vector<Topic> topics_;
};

/// Region name -> bounding box.
class RegionGazetteer {
public:
    RegionGazetteer() = default;

    void add(std::string_view name, const BBox& box);
    /// Longest region name occurring in the query (case-insensitive, word
    /// bounded); earlier position breaks length ties.
    std::optional<std::pair<std::string, BBox>> find(std::string_view query) const;

    static RegionGazetteer from_json(std::string_view json_text);
    static RegionGazetteer load(const std::filesystem::path& path);
    static RegionGazetteer defaults();

private:
    std::vector<std::pair<std::string, BBox>> regions_;
};

/// Prompt templates with a "{query}" placeholder.
struct PromptTemplates {
    std::string intent;
    std::string rewrite;
    std::string rerank;  // also uses "{candidates}"

    static PromptTemplates defaults();
};

IntentType classify_intent(std::string_view query, StageMode mode, LlmProvider* provider,
                           const Gazetteer& gazetteer,
                           const PromptTemplates& prompts = PromptTemplates::defaults(),
                           std::vector<std::string>* warnings = nullptr);

struct Rewrite {
    std::string rewritten;
    std::string reasoning;

    bool operator==(const Rewrite&) const = default;
};

Rewrite rewrite_query(std::string_view query, StageMode mode, LlmProvider* provider,
                      const TopicMap& topics,
                      const PromptTemplates& prompts = PromptTemplates::defaults(),
                      std::vector<std::string>* warnings = nullptr);

/// Parses a rewrite reply: a JSON object with a nonempty string "query" and
/// optional string "reasoning". Surrounding prose or code fences are
/// tolerated. Returns nullopt when unusable.
std::optional<Rewrite> parse_rewrite_reply(std::string_view reply);

QueryConstraints extract_constraints(std::string_view query, const RegionGazetteer& regions);

/// Replaces alphabetic words of length >= 5 that are one edit (insertion,
/// deletion, substitution or adjacent transposition) away from exactly one
/// vocabulary word.
std::string spell_correct(std::string_view query, const std::vector<std::string>& vocabulary);

struct UnderstandingConfig {
    StageMode intent_mode = StageMode::Rules;
    StageMode rewrite_mode = StageMode::Rules;
    LlmProvider* provider = nullptr;
    Gazetteer gazetteer = Gazetteer::defaults();
    TopicMap topics = TopicMap::defaults();
    RegionGazetteer regions = RegionGazetteer::defaults();
    PromptTemplates prompts = PromptTemplates::defaults();
};

/// classify -> (rewrite for Type B | spell pass for Type A) -> constraints
/// from the original query. Throws InvalidArgument("empty query").
UnderstoodQuery understand(std::string_view query, const UnderstandingConfig& config);

}  // namespace esd
