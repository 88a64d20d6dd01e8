#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esd/catalog.hpp"

namespace esd {

// ---------------------------------------------------------------------------
// Metrics. `ranked` is the system's ordering (best first); repeated ids
// after their first position are ignored. All throw InvalidArgument when the
// ground-truth set is empty.

using GroundTruth = std::set<std::string, std::less<>>;

/// |top-k ∩ gt| / |gt|.
double recall_at_k(std::span<const std::string> ranked, const GroundTruth& gt, std::size_t k);

/// 1 / (1-based rank of the first relevant item), 0 when none is retrieved.
double reciprocal_rank(std::span<const std::string> ranked, const GroundTruth& gt);

/// (1/|gt|) * sum over ranks k of precision@k * rel(k).
double average_precision(std::span<const std::string> ranked, const GroundTruth& gt);

// ---------------------------------------------------------------------------
// Benchmark cases

enum class QueryType { Keyword, Task };
std::string_view to_string(QueryType t);
std::optional<QueryType> parse_query_type(std::string_view s);

struct BenchmarkCase {
    std::string query;
    QueryType query_type = QueryType::Keyword;
    GroundTruth groundtruth;
    std::string paper_id;

    bool operator==(const BenchmarkCase&) const = default;
};

/// JSON Lines: {"query", "query_type": "KEYWORD"|"TASK", "groundtruth": [...], "paper_id"}.
std::vector<BenchmarkCase> load_benchmark(const std::filesystem::path& path);
std::vector<BenchmarkCase> parse_benchmark(std::istream& in);
void write_benchmark(const std::vector<BenchmarkCase>& cases, std::ostream& out);

// ---------------------------------------------------------------------------
// Evaluation

struct CaseResult {
    std::size_t case_index = 0;
    QueryType query_type = QueryType::Keyword;
    bool failed = false;
    std::string error;
    std::optional<std::size_t> first_relevant_rank;
    double reciprocal_rank = 0.0;
    double average_precision = 0.0;
    std::vector<double> recall;        // aligned with EvalReport::ks
    std::vector<std::size_t> hits;     // |top-k ∩ gt|, aligned with ks
};

struct MetricSummary {
    std::size_t n = 0;
    std::vector<double> recall;  // aligned with ks
    double mrr = 0.0;
    double map = 0.0;
};

struct EvalReport {
    std::vector<std::size_t> ks;
    std::size_t result_depth = 0;
    std::map<QueryType, MetricSummary> by_type;
    MetricSummary overall;
    std::size_t failed = 0;
    std::vector<CaseResult> cases;
};

/// Runs a query and returns the ranked record ids (at most `depth`).
using SearchFn = std::function<std::vector<std::string>(const std::string& query, std::size_t depth)>;

/// Per-case metrics, macro-averaged within each query type and overall.
/// Cases whose search throws are marked failed and excluded from averages.
/// With threads > 1 cases run concurrently; the report does not depend on
/// scheduling.
EvalReport evaluate(const std::vector<BenchmarkCase>& cases, const SearchFn& search,
                    std::vector<std::size_t> ks, std::size_t result_depth, std::size_t threads = 1);

std::string report_json(const EvalReport& report, int indent = 2);
/// Aligned plain-text table: query type, n, R@k..., MRR, MAP.
std::string report_table(const EvalReport& report);

// ---------------------------------------------------------------------------
// Ground-truth construction

struct FuzzyMatchOptions {
    double threshold = 0.85;
    /// Also accept records whose token set contains every token of the name.
    bool containment = true;
};

/// Token set used on both sides of fuzzy matching: tokenize, then version
/// tokens ("V06", "v6", "006") reduced to the bare number and a standalone
/// "v"/"version" ahead of a number dropped.
std::set<std::string> fuzzy_tokens(std::string_view text);

/// Ids of records whose normalized title+id token set has Jaccard similarity
/// >= threshold with the name (or contains the whole name, see options),
/// plus records whose id appears verbatim (case-insensitive, word bounded) in
/// the name. Catalog order.
std::vector<std::string> fuzzy_match(std::string_view name, const Catalog& catalog,
                                     const FuzzyMatchOptions& options = {});

struct UrlPattern {
    std::string name;
    std::string pattern;
    std::regex regex;  // matched capture groups, joined by '_', form the record id
};

std::vector<UrlPattern> url_patterns_from_json(std::string_view json_text);
std::vector<UrlPattern> load_url_patterns(const std::filesystem::path& path);
std::vector<UrlPattern> default_url_patterns();

/// First id captured by a pattern that names a catalog record, if any.
/// Comparison ignores case and leading zeros of numeric '_' segments.
std::optional<std::string> match_url(std::string_view url, const Catalog& catalog,
                                     const std::vector<UrlPattern>& patterns);

struct DatasetRef {
    std::string name;
    std::string doi_or_url;

    bool operator==(const DatasetRef&) const = default;
};

/// Mirrors the paper-extraction response schema.
struct ExtractionRecord {
    std::vector<DatasetRef> datasets;
    std::vector<std::string> keywords;
    bool is_original_keywords = false;
    std::vector<std::string> i_want_to;

    bool operator==(const ExtractionRecord&) const = default;
};

/// Strict: exactly the four keys, enforced types. Throws DataError naming the
/// first violation.
ExtractionRecord parse_extraction(std::string_view text);

/// One KEYWORD case (keywords joined by spaces) and one TASK case per
/// "I want to" statement, all sharing the union of matched ids as ground
/// truth. No cases when nothing matches.
std::vector<BenchmarkCase> match_groundtruth(const ExtractionRecord& extraction,
                                             const Catalog& catalog,
                                             const std::vector<UrlPattern>& patterns,
                                             const FuzzyMatchOptions& options,
                                             std::string_view paper_id);

}  // namespace esd
