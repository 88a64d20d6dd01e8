#include "esd/understanding.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "esd/assets.hpp"
#include "esd/error.hpp"
#include "util.hpp"

namespace esd {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(IntentType t) { return t == IntentType::TypeA ? "TYPE_A" : "TYPE_B"; }

std::string_view to_string(StageMode m) { return m == StageMode::Rules ? "rules" : "provider"; }

std::optional<StageMode> parse_stage_mode(std::string_view s) {
    const auto lower = detail::to_lower(s);
    if (lower == "rules") return StageMode::Rules;
    if (lower == "provider") return StageMode::Provider;
    return std::nullopt;
}

namespace {

template <typename Json>
Json parse_json(std::string_view text, std::string_view what) {
    try {
        return Json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string(what) + ": malformed JSON: " + e.what());
    }
}

bool contains_sequence(const TokenStream& hay, const TokenStream& needle, bool prefix_match) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < needle.size() && ok; ++j) {
            ok = prefix_match ? hay[i + j].starts_with(needle[j]) : hay[i + j] == needle[j];
        }
        if (ok) return true;
    }
    return false;
}

bool is_alpha_word(std::string_view w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    });
}

// Optimal string alignment distance, capped: returns > 1 as soon as the
// distance is known to exceed 1.
std::size_t osa_distance(std::string_view a, std::string_view b) {
    const std::size_t n = a.size(), m = b.size();
    if ((n > m ? n - m : m - n) > 1) return 2;
    std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
            if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1])
                d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
        }
    }
    return d[n][m];
}

}  // namespace

// ---------------------------------------------------------------------------
// Gazetteer

Gazetteer::Gazetteer(const std::vector<std::string>& terms) {
    for (const auto& t : terms) add(t);
}

void Gazetteer::add(std::string_view term) {
    auto tokens = tokenize(term);
    if (tokens.empty()) return;
    for (const auto& tok : tokens) {
        if (tok.size() >= 5 && is_alpha_word(tok)) {
            auto it = std::lower_bound(vocabulary_.begin(), vocabulary_.end(), tok);
            if (it == vocabulary_.end() || *it != tok) vocabulary_.insert(it, tok);
        }
    }
    terms_.emplace_back(std::string(term), std::move(tokens));
}

std::optional<std::string> Gazetteer::first_match(std::string_view query) const {
    const auto tokens = tokenize(query);
    for (const auto& [term, seq] : terms_)
        if (contains_sequence(tokens, seq, false)) return term;
    return std::nullopt;
}

bool Gazetteer::matches(std::string_view query) const { return first_match(query).has_value(); }

Gazetteer Gazetteer::from_json(std::string_view json_text) {
    auto doc = parse_json<ordered_json>(json_text, "gazetteer");
    Gazetteer g;
    auto add_list = [&](const ordered_json& arr, const std::string& where) {
        if (!arr.is_array()) throw DataError("gazetteer: '" + where + "' must be an array");
        for (const auto& item : arr) {
            if (!item.is_string()) throw DataError("gazetteer: terms must be strings");
            g.add(item.get<std::string>());
        }
    };
    if (doc.is_array()) {
        add_list(doc, "root");
    } else if (doc.is_object()) {
        for (const auto& [key, value] : doc.items()) add_list(value, key);
    } else {
        throw DataError("gazetteer: expected an array or object of arrays");
    }
    return g;
}

Gazetteer Gazetteer::load(const std::filesystem::path& path) {
    return from_json(detail::read_file(path));
}

Gazetteer Gazetteer::defaults() { return from_json(asset("gazetteer.json")); }

// ---------------------------------------------------------------------------
// TopicMap

void TopicMap::add(std::string_view trigger, std::vector<std::string> terms) {
    auto tokens = tokenize(trigger);
    if (tokens.empty()) throw DataError("topic map: empty trigger");
    topics_.push_back({std::string(trigger), std::move(tokens), std::move(terms)});
}

std::vector<std::string> TopicMap::expansions(std::string_view query,
                                              std::vector<std::string>* matched) const {
    const auto tokens = tokenize(query);
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& topic : topics_) {
        if (!contains_sequence(tokens, topic.trigger_tokens, true)) continue;
        if (matched) matched->push_back(topic.trigger);
        for (const auto& term : topic.terms)
            if (seen.insert(term).second) out.push_back(term);
    }
    return out;
}

TopicMap TopicMap::from_json(std::string_view json_text) {
    auto doc = parse_json<ordered_json>(json_text, "topic map");
    if (!doc.is_object()) throw DataError("topic map: expected a JSON object");
    TopicMap map;
    for (const auto& [trigger, terms] : doc.items()) {
        if (!terms.is_array()) throw DataError("topic map: '" + trigger + "' must map to an array");
        std::vector<std::string> list;
        for (const auto& t : terms) {
            if (!t.is_string()) throw DataError("topic map: terms must be strings");
            list.push_back(t.get<std::string>());
        }
        map.add(trigger, std::move(list));
    }
    return map;
}

TopicMap TopicMap::load(const std::filesystem::path& path) {
    return from_json(detail::read_file(path));
}

TopicMap TopicMap::defaults() { return from_json(asset("topics.json")); }

// ---------------------------------------------------------------------------
// RegionGazetteer

void RegionGazetteer::add(std::string_view name, const BBox& box) {
    if (detail::trim(name).empty()) throw DataError("region gazetteer: empty name");
    if (box.south > box.north || box.south < -90.0 || box.north > 90.0)
        throw DataError("region gazetteer: invalid latitudes for '" + std::string(name) + "'");
    regions_.emplace_back(std::string(name), box);
}

std::optional<std::pair<std::string, BBox>> RegionGazetteer::find(std::string_view query) const {
    const auto hay = detail::to_lower(query);
    const std::pair<std::string, BBox>* best = nullptr;
    std::size_t best_pos = 0;
    for (const auto& region : regions_) {
        const auto pos = detail::find_word(hay, detail::to_lower(region.first));
        if (pos == std::string::npos) continue;
        if (!best || region.first.size() > best->first.size() ||
            (region.first.size() == best->first.size() && pos < best_pos)) {
            best = &region;
            best_pos = pos;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

RegionGazetteer RegionGazetteer::from_json(std::string_view json_text) {
    auto doc = parse_json<ordered_json>(json_text, "region gazetteer");
    if (!doc.is_object()) throw DataError("region gazetteer: expected a JSON object");
    RegionGazetteer g;
    for (const auto& [name, box] : doc.items()) {
        if (!box.is_array() || box.size() != 4 ||
            !std::all_of(box.begin(), box.end(), [](const auto& v) { return v.is_number(); }))
            throw DataError("region gazetteer: '" + name + "' must be [west, south, east, north]");
        g.add(name, BBox{box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
                         box[3].get<double>()});
    }
    return g;
}

RegionGazetteer RegionGazetteer::load(const std::filesystem::path& path) {
    return from_json(detail::read_file(path));
}

RegionGazetteer RegionGazetteer::defaults() { return from_json(asset("regions.json")); }

PromptTemplates PromptTemplates::defaults() {
    return {std::string(asset("prompts/intent.txt")), std::string(asset("prompts/rewrite.txt")),
            std::string(asset("prompts/rerank.txt"))};
}

// ---------------------------------------------------------------------------
// Intent

IntentType classify_intent(std::string_view query, StageMode mode, LlmProvider* provider,
                           const Gazetteer& gazetteer, const PromptTemplates& prompts,
                           std::vector<std::string>* warnings) {
    auto by_rules = [&] { return gazetteer.matches(query) ? IntentType::TypeA : IntentType::TypeB; };
    if (mode == StageMode::Rules) return by_rules();
    if (!provider) throw InvalidArgument("provider mode requires a provider");

    const auto prompt = fill_template(prompts.intent, {{"query", std::string(query)}});
    std::string warning;
    try {
        const auto reply = std::string(detail::trim(provider->complete(prompt)));
        if (reply == "A") return IntentType::TypeA;
        if (reply == "B") return IntentType::TypeB;
        warning = "intent: unexpected provider reply '" + reply.substr(0, 40) +
                  "'; fell back to rules";
    } catch (const ProviderError& e) {
        warning = std::string("intent: provider failed (") + e.what() + "); fell back to rules";
    }
    if (warnings) warnings->push_back(warning);
    return by_rules();
}

// ---------------------------------------------------------------------------
// Rewrite

std::optional<Rewrite> parse_rewrite_reply(std::string_view reply) {
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        return std::nullopt;
    json doc;
    try {
        doc = json::parse(reply.substr(open, close - open + 1));
    } catch (const json::parse_error&) {
        return std::nullopt;
    }
    if (!doc.is_object()) return std::nullopt;
    auto q = doc.find("query");
    if (q == doc.end() || !q->is_string()) return std::nullopt;
    Rewrite out;
    out.rewritten = std::string(detail::trim(q->get<std::string>()));
    if (out.rewritten.empty()) return std::nullopt;
    if (auto r = doc.find("reasoning"); r != doc.end()) {
        if (!r->is_string()) return std::nullopt;
        out.reasoning = r->get<std::string>();
    }
    return out;
}

Rewrite rewrite_query(std::string_view query, StageMode mode, LlmProvider* provider,
                      const TopicMap& topics, const PromptTemplates& prompts,
                      std::vector<std::string>* warnings) {
    auto by_rules = [&] {
        std::vector<std::string> matched;
        const auto terms = topics.expansions(query, &matched);
        Rewrite out{std::string(query), {}};
        if (terms.empty()) {
            out.reasoning = "no research topic recognised; query kept as is";
            return out;
        }
        for (const auto& t : terms) out.rewritten += " " + t;
        out.reasoning = "topics: " + detail::join(matched, ", ");
        return out;
    };
    if (mode == StageMode::Rules) return by_rules();
    if (!provider) throw InvalidArgument("provider mode requires a provider");

    const auto prompt = fill_template(prompts.rewrite, {{"query", std::string(query)}});
    std::string failure;
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            if (auto parsed = parse_rewrite_reply(provider->complete(prompt))) return *parsed;
            failure = "unparseable reply";
        } catch (const ProviderError& e) {
            failure = e.what();
        }
    }
    if (warnings) warnings->push_back("rewrite: provider failed (" + failure + "); fell back to rules");
    return by_rules();
}

// ---------------------------------------------------------------------------
// Constraints

QueryConstraints extract_constraints(std::string_view query, const RegionGazetteer& regions) {
    QueryConstraints out;

    struct YearAt {
        int year;
        std::size_t begin;
        std::size_t end;
    };
    std::vector<YearAt> years;
    for (std::size_t i = 0; i < query.size();) {
        if (!detail::is_alnum(query[i])) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < query.size() && detail::is_alnum(query[i])) ++i;
        const auto word = query.substr(start, i - start);
        if (word.size() == 4 && std::all_of(word.begin(), word.end(),
                                            [](char c) { return c >= '0' && c <= '9'; })) {
            const int y = std::stoi(std::string(word));
            if (y >= 1900 && y <= 2099) years.push_back({y, start, i});
        }
    }

    auto is_range_joiner = [](std::string_view gap) {
        const auto g = detail::to_lower(detail::trim(gap));
        return g == "-" || g == "--" || g == "to" || g == "–" || g == "—";
    };

    std::optional<std::pair<int, int>> span;
    auto extend = [&span](int lo, int hi) {
        if (!span) span = std::pair{lo, hi};
        else span = std::pair{std::min(span->first, lo), std::max(span->second, hi)};
    };
    for (std::size_t i = 0; i < years.size(); ++i) {
        if (i + 1 < years.size() &&
            is_range_joiner(query.substr(years[i].end, years[i + 1].begin - years[i].end))) {
            extend(std::min(years[i].year, years[i + 1].year),
                   std::max(years[i].year, years[i + 1].year));
            ++i;
        } else {
            extend(years[i].year, years[i].year);
        }
    }
    if (span) out.temporal = DateRange{make_date(span->first, 1, 1), make_date(span->second, 12, 31)};

    if (auto region = regions.find(query)) out.spatial = region->second;
    return out;
}

// ---------------------------------------------------------------------------
// Spelling

std::string spell_correct(std::string_view query, const std::vector<std::string>& vocabulary) {
    std::string out;
    std::size_t i = 0;
    while (i < query.size()) {
        if (!detail::is_alnum(query[i])) {
            out += query[i++];
            continue;
        }
        const std::size_t start = i;
        while (i < query.size() && detail::is_alnum(query[i])) ++i;
        const auto word = query.substr(start, i - start);
        const auto lower = detail::to_lower(word);
        auto known = [&](std::string_view w) {
            return std::binary_search(vocabulary.begin(), vocabulary.end(), w);
        };
        // Plurals of known words are left alone.
        if (word.size() < 5 || !is_alpha_word(word) || known(lower) ||
            (lower.back() == 's' && known(std::string_view(lower).substr(0, lower.size() - 1)))) {
            out += word;
            continue;
        }
        const std::string* match = nullptr;
        bool ambiguous = false;
        for (const auto& v : vocabulary) {
            if (osa_distance(lower, v) == 1) {
                ambiguous = match != nullptr;
                match = &v;
                if (ambiguous) break;
            }
        }
        out += (match && !ambiguous) ? std::string_view(*match) : word;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Composition

UnderstoodQuery understand(std::string_view query, const UnderstandingConfig& config) {
    if (detail::trim(query).empty()) throw InvalidArgument("empty query");
    UnderstoodQuery uq;
    uq.original = std::string(query);
    uq.intent = classify_intent(query, config.intent_mode, config.provider, config.gazetteer,
                                config.prompts, &uq.warnings);
    if (uq.intent == IntentType::TypeB) {
        auto rw = rewrite_query(query, config.rewrite_mode, config.provider, config.topics,
                                config.prompts, &uq.warnings);
        uq.rewritten = std::move(rw.rewritten);
        uq.rewrite_reasoning = std::move(rw.reasoning);
    } else {
        uq.rewritten = spell_correct(query, config.gazetteer.vocabulary());
    }
    if (detail::trim(uq.rewritten).empty()) uq.rewritten = uq.original;
    uq.constraints = extract_constraints(query, config.regions);
    return uq;
}

}  // namespace esd
