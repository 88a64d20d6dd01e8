#include "esd/catalog.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "esd/assets.hpp"
#include "esd/error.hpp"
#include "util.hpp"

namespace esd {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Source, std::string_view>, 5> kSourceNames{{
    {Source::CMR, "CMR"},
    {Source::ONESTOP, "ONESTOP"},
    {Source::CMIP6, "CMIP6"},
    {Source::ERA5, "ERA5"},
    {Source::OTHER, "OTHER"},
}};

[[noreturn]] void fail(std::size_t line_no, std::string_view field, const std::string& what) {
    std::string msg = "line " + std::to_string(line_no);
    if (!field.empty()) msg += ", field '" + std::string(field) + "'";
    throw DataError(msg + ": " + what);
}

std::string string_field(const json& v, std::size_t line_no, std::string_view key) {
    if (!v.is_string()) fail(line_no, key, "expected string");
    return v.get<std::string>();
}

std::vector<std::string> string_list(const json& v, std::size_t line_no, std::string_view key) {
    if (!v.is_array()) fail(line_no, key, "expected array of strings");
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& item : v) {
        if (!item.is_string()) fail(line_no, key, "expected array of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::optional<Date> date_field(const json& v, std::size_t line_no, std::string_view key) {
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) fail(line_no, key, "expected date string YYYY-MM-DD");
    auto d = parse_date(v.get<std::string>());
    if (!d) fail(line_no, key, "invalid date '" + v.get<std::string>() + "'");
    return d;
}

}  // namespace

std::string_view to_string(Source s) {
    for (const auto& [src, name] : kSourceNames)
        if (src == s) return name;
    return "OTHER";
}

std::optional<Source> parse_source(std::string_view s) {
    for (const auto& [src, name] : kSourceNames)
        if (name == s) return src;
    return std::nullopt;
}

std::vector<Violation> validate_record(const CatalogRecord& r) {
    std::vector<Violation> out;
    if (r.id.empty()) out.push_back({"id", "empty id"});
    if (r.temporal_start && r.temporal_end && *r.temporal_start > *r.temporal_end)
        out.push_back({"temporal_start", "temporal order"});
    if (r.bbox) {
        const auto& b = *r.bbox;
        if (!(b.south >= -90.0) || !(b.north <= 90.0)) out.push_back({"bbox", "latitude range"});
        if (b.south > b.north) out.push_back({"bbox", "latitude order"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Catalog

void Catalog::add(CatalogRecord record) {
    if (record.id.empty()) throw DataError("record with empty id");
    if (by_id_.count(record.id)) throw DataError("duplicate id '" + record.id + "'");
    by_id_.emplace(record.id, records_.size());
    records_.push_back(std::move(record));
}

const CatalogRecord* Catalog::find(std::string_view id) const {
    auto pos = position(id);
    return pos ? &records_[*pos] : nullptr;
}

std::optional<std::size_t> Catalog::position(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------
// JSON Lines

CatalogRecord record_from_json_line(std::string_view line, std::size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        fail(line_no, "", std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) fail(line_no, "", "expected a JSON object");

    CatalogRecord r;
    bool has_id = false;
    for (const auto& [key, value] : obj.items()) {
        if (key == "id") {
            r.id = string_field(value, line_no, key);
            has_id = true;
        } else if (key == "title") {
            r.title = string_field(value, line_no, key);
        } else if (key == "summary") {
            r.summary = string_field(value, line_no, key);
        } else if (key == "variables") {
            r.variables = string_list(value, line_no, key);
        } else if (key == "keywords") {
            r.keywords = string_list(value, line_no, key);
        } else if (key == "urls") {
            r.urls = string_list(value, line_no, key);
        } else if (key == "source") {
            auto src = parse_source(string_field(value, line_no, key));
            if (!src) fail(line_no, key, "unknown source '" + value.get<std::string>() + "'");
            r.source = *src;
        } else if (key == "temporal_start") {
            r.temporal_start = date_field(value, line_no, key);
        } else if (key == "temporal_end") {
            r.temporal_end = date_field(value, line_no, key);
        } else if (key == "bbox") {
            if (value.is_null()) continue;
            if (!value.is_array() || value.size() != 4)
                fail(line_no, key, "expected [west, south, east, north]");
            std::array<double, 4> v{};
            for (std::size_t i = 0; i < 4; ++i) {
                if (!value[i].is_number()) fail(line_no, key, "expected numeric coordinates");
                v[i] = value[i].get<double>();
            }
            r.bbox = BBox{v[0], v[1], v[2], v[3]};
        } else {
            fail(line_no, key, "unknown field");
        }
    }
    if (!has_id) fail(line_no, "id", "missing");
    if (auto violations = validate_record(r); !violations.empty())
        fail(line_no, violations.front().field, violations.front().message);
    return r;
}

std::string record_to_json_line(const CatalogRecord& r) {
    json obj = json::object();
    obj["id"] = r.id;
    obj["title"] = r.title;
    obj["summary"] = r.summary;
    obj["variables"] = r.variables;
    obj["keywords"] = r.keywords;
    obj["source"] = std::string(to_string(r.source));
    if (r.temporal_start) obj["temporal_start"] = format_date(*r.temporal_start);
    if (r.temporal_end) obj["temporal_end"] = format_date(*r.temporal_end);
    if (r.bbox) obj["bbox"] = {r.bbox->west, r.bbox->south, r.bbox->east, r.bbox->north};
    obj["urls"] = r.urls;
    return obj.dump();
}

Catalog parse_records(std::istream& in) {
    Catalog catalog;
    std::unordered_map<std::string, std::size_t> first_line;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto record = record_from_json_line(line, line_no);
        auto [it, inserted] = first_line.emplace(record.id, line_no);
        if (!inserted)
            throw DataError("duplicate id '" + record.id + "' at lines " +
                            std::to_string(it->second) + " and " + std::to_string(line_no));
        catalog.add(std::move(record));
    }
    if (in.bad()) throw IoError("error while reading catalog stream");
    return catalog;
}

Catalog ingest_records(const std::filesystem::path& path, CatalogFormat format) {
    if (format != CatalogFormat::JsonLines) throw InvalidArgument("unsupported catalog format");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open catalog " + path.string());
    return parse_records(in);
}

void write_records(const Catalog& catalog, std::ostream& out) {
    for (const auto& r : catalog.records()) out << record_to_json_line(r) << '\n';
}

// ---------------------------------------------------------------------------
// VariableMap

void VariableMap::add(std::string_view alias, std::string_view canonical) {
    if (alias.empty() || canonical.empty()) throw DataError("variable map entries must be nonempty");
    const auto canon_key = detail::to_lower(canonical);
    if (auto it = entries_.find(canon_key); it != entries_.end() && it->second != canonical)
        throw DataError("canonical name '" + std::string(canonical) + "' is already an alias of '" +
                        it->second + "'");
    entries_[canon_key] = std::string(canonical);

    const auto alias_key = detail::to_lower(alias);
    if (auto it = entries_.find(alias_key); it != entries_.end() && it->second != canonical)
        throw DataError("alias '" + std::string(alias) + "' maps to both '" + it->second +
                        "' and '" + std::string(canonical) + "'");
    entries_[alias_key] = std::string(canonical);
}

std::optional<std::string> VariableMap::canonical(std::string_view name) const {
    auto it = entries_.find(detail::to_lower(name));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

VariableMap VariableMap::from_json(std::string_view json_text) {
    json obj;
    try {
        obj = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("variable map: malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw DataError("variable map: expected a JSON object");
    VariableMap map;
    for (const auto& [alias, canonical] : obj.items()) {
        if (!canonical.is_string())
            throw DataError("variable map: value for '" + alias + "' must be a string");
        map.add(alias, canonical.get<std::string>());
    }
    return map;
}

VariableMap VariableMap::load(const std::filesystem::path& path) {
    return from_json(detail::read_file(path));
}

VariableMap VariableMap::defaults() { return from_json(asset("variables.json")); }

CatalogRecord normalize_variables(const CatalogRecord& record, const VariableMap& map) {
    CatalogRecord out = record;
    out.variables.clear();
    std::unordered_set<std::string> seen;
    for (const auto& v : record.variables) {
        auto name = map.canonical(v).value_or(v);
        if (seen.insert(name).second) out.variables.push_back(std::move(name));
    }
    return out;
}

}  // namespace esd
