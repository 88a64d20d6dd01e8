#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "esd/dates.hpp"

namespace esd {

enum class Source { CMR, ONESTOP, CMIP6, ERA5, OTHER };

std::string_view to_string(Source s);
std::optional<Source> parse_source(std::string_view s);

/// Geographic bounding box in degrees. west > east denotes a box that
/// crosses the antimeridian.
struct BBox {
    double west = -180.0;
    double south = -90.0;
    double east = 180.0;
    double north = 90.0;

    bool operator==(const BBox&) const = default;
};

/// One dataset metadata entry.
struct CatalogRecord {
    std::string id;
    std::string title;
    std::string summary;
    std::vector<std::string> variables;
    std::vector<std::string> keywords;
    Source source = Source::OTHER;
    std::optional<Date> temporal_start;
    std::optional<Date> temporal_end;
    std::optional<BBox> bbox;
    std::vector<std::string> urls;

    bool operator==(const CatalogRecord&) const = default;
};

struct Violation {
    std::string field;
    std::string message;

    bool operator==(const Violation&) const = default;
};

/// Checks every CatalogRecord invariant; never throws.
std::vector<Violation> validate_record(const CatalogRecord& record);

/// Ordered, id-unique collection of records. Immutable once handed to the
/// index builders.
class Catalog {
public:
    Catalog() = default;

    /// Throws DataError on a duplicate or empty id.
    void add(CatalogRecord record);

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    const std::vector<CatalogRecord>& records() const { return records_; }
    const CatalogRecord& operator[](std::size_t pos) const { return records_[pos]; }

    const CatalogRecord* find(std::string_view id) const;
    std::optional<std::size_t> position(std::string_view id) const;

    bool operator==(const Catalog& other) const { return records_ == other.records_; }

private:
    std::vector<CatalogRecord> records_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

enum class CatalogFormat { JsonLines };

/// Reads a JSON Lines catalog dump. Blank lines are skipped. Every record is
/// validated; the first problem aborts ingestion with a DataError naming the
/// line (and field where applicable).
Catalog ingest_records(const std::filesystem::path& path,
                       CatalogFormat format = CatalogFormat::JsonLines);
Catalog parse_records(std::istream& in);

CatalogRecord record_from_json_line(std::string_view line, std::size_t line_no);
std::string record_to_json_line(const CatalogRecord& record);
void write_records(const Catalog& catalog, std::ostream& out);

/// Alias -> canonical variable-name table. Lookups are case-insensitive and
/// every canonical name maps to itself.
class VariableMap {
public:
    VariableMap() = default;

    /// Throws DataError if `canonical` is already registered as an alias of a
    /// different canonical name (would break the fixed-point property).
    void add(std::string_view alias, std::string_view canonical);

    /// Canonical form of `name`, or nullopt when unknown.
    std::optional<std::string> canonical(std::string_view name) const;

    std::size_t size() const { return entries_.size(); }

    static VariableMap defaults();
    static VariableMap from_json(std::string_view json_text);
    static VariableMap load(const std::filesystem::path& path);

private:
    std::map<std::string, std::string> entries_;  // lowercase alias -> canonical
};

/// Replaces aliased variable names by their canonical form and removes
/// duplicates, keeping the first occurrence.
CatalogRecord normalize_variables(const CatalogRecord& record, const VariableMap& map);

}  // namespace esd
