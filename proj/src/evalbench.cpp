#include "esd/evalbench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "esd/assets.hpp"
#include "esd/error.hpp"
#include "esd/textproc.hpp"
#include "util.hpp"

namespace esd {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Metrics

namespace {

void require_gt(const GroundTruth& gt) {
    if (gt.empty()) throw InvalidArgument("ground truth is empty; metric undefined");
}

// Walks the ranking once, calling visit(rank, relevant) for each distinct id;
// repeats are skipped and do not take up a rank.
template <typename Visit>
void walk(std::span<const std::string> ranked, const GroundTruth& gt, std::size_t limit,
          Visit&& visit) {
    std::unordered_set<std::string_view> seen;
    std::size_t rank = 0;
    for (const auto& id : ranked) {
        if (rank >= limit) break;
        if (!seen.insert(id).second) continue;
        ++rank;
        visit(rank, gt.count(id) > 0);
    }
}

}  // namespace

double recall_at_k(std::span<const std::string> ranked, const GroundTruth& gt, std::size_t k) {
    require_gt(gt);
    if (k == 0) throw InvalidArgument("k must be >= 1");
    std::size_t hits = 0;
    walk(ranked, gt, k, [&](std::size_t, bool rel) { hits += rel; });
    return static_cast<double>(hits) / static_cast<double>(gt.size());
}

double reciprocal_rank(std::span<const std::string> ranked, const GroundTruth& gt) {
    require_gt(gt);
    std::size_t first = 0;
    walk(ranked, gt, ranked.size(), [&](std::size_t rank, bool rel) {
        if (rel && first == 0) first = rank;
    });
    return first == 0 ? 0.0 : 1.0 / static_cast<double>(first);
}

double average_precision(std::span<const std::string> ranked, const GroundTruth& gt) {
    require_gt(gt);
    std::size_t hits = 0;
    double sum = 0.0;
    walk(ranked, gt, ranked.size(), [&](std::size_t rank, bool rel) {
        if (!rel) return;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(rank);
    });
    return sum / static_cast<double>(gt.size());
}

// ---------------------------------------------------------------------------
// Benchmark files

std::string_view to_string(QueryType t) { return t == QueryType::Keyword ? "KEYWORD" : "TASK"; }

std::optional<QueryType> parse_query_type(std::string_view s) {
    if (s == "KEYWORD") return QueryType::Keyword;
    if (s == "TASK") return QueryType::Task;
    return std::nullopt;
}

std::vector<BenchmarkCase> parse_benchmark(std::istream& in) {
    std::vector<BenchmarkCase> cases;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto where = "benchmark line " + std::to_string(line_no) + ": ";
        try {
            const auto obj = json::parse(line);
            if (!obj.is_object()) throw DataError(where + "expected a JSON object");
            for (const auto& [key, _] : obj.items()) {
                if (key != "query" && key != "query_type" && key != "groundtruth" && key != "paper_id")
                    throw DataError(where + "unknown field '" + key + "'");
            }
            BenchmarkCase c;
            c.query = obj.at("query").get<std::string>();
            auto type = parse_query_type(obj.at("query_type").get<std::string>());
            if (!type) throw DataError(where + "query_type must be KEYWORD or TASK");
            c.query_type = *type;
            for (const auto& id : obj.at("groundtruth")) c.groundtruth.insert(id.get<std::string>());
            if (obj.contains("paper_id")) c.paper_id = obj.at("paper_id").get<std::string>();
            if (detail::trim(c.query).empty()) throw DataError(where + "empty query");
            if (c.groundtruth.empty()) throw DataError(where + "empty groundtruth");
            cases.push_back(std::move(c));
        } catch (const json::exception& e) {
            throw DataError(where + e.what());
        }
    }
    return cases;
}

std::vector<BenchmarkCase> load_benchmark(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open benchmark " + path.string());
    return parse_benchmark(in);
}

void write_benchmark(const std::vector<BenchmarkCase>& cases, std::ostream& out) {
    for (const auto& c : cases) {
        json obj = {{"query", c.query},
                    {"query_type", std::string(to_string(c.query_type))},
                    {"groundtruth", std::vector<std::string>(c.groundtruth.begin(), c.groundtruth.end())},
                    {"paper_id", c.paper_id}};
        out << obj.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

CaseResult score_case(const BenchmarkCase& c, std::size_t index,
                      const std::vector<std::string>& ranked, const std::vector<std::size_t>& ks) {
    CaseResult r;
    r.case_index = index;
    r.query_type = c.query_type;
    r.reciprocal_rank = reciprocal_rank(ranked, c.groundtruth);
    r.average_precision = average_precision(ranked, c.groundtruth);
    walk(ranked, c.groundtruth, ranked.size(), [&](std::size_t rank, bool rel) {
        if (rel && !r.first_relevant_rank) r.first_relevant_rank = rank;
    });
    for (auto k : ks) {
        std::size_t hits = 0;
        walk(ranked, c.groundtruth, k, [&](std::size_t, bool rel) { hits += rel; });
        r.hits.push_back(hits);
        r.recall.push_back(recall_at_k(ranked, c.groundtruth, k));
    }
    return r;
}

MetricSummary summarize(const std::vector<CaseResult>& results, std::size_t n_ks,
                        std::optional<QueryType> type) {
    MetricSummary s;
    s.recall.assign(n_ks, 0.0);
    for (const auto& r : results) {
        if (r.failed || (type && r.query_type != *type)) continue;
        ++s.n;
        for (std::size_t i = 0; i < n_ks; ++i) s.recall[i] += r.recall[i];
        s.mrr += r.reciprocal_rank;
        s.map += r.average_precision;
    }
    if (s.n > 0) {
        const double n = static_cast<double>(s.n);
        for (auto& v : s.recall) v /= n;
        s.mrr /= n;
        s.map /= n;
    }
    return s;
}

}  // namespace

EvalReport evaluate(const std::vector<BenchmarkCase>& cases, const SearchFn& search,
                    std::vector<std::size_t> ks, std::size_t result_depth, std::size_t threads) {
    if (cases.empty()) throw InvalidArgument("no benchmark cases");
    if (ks.empty()) throw InvalidArgument("no cutoffs requested");
    if (std::find(ks.begin(), ks.end(), std::size_t{0}) != ks.end())
        throw InvalidArgument("cutoffs must be >= 1");
    if (result_depth < *std::max_element(ks.begin(), ks.end()))
        throw InvalidArgument("result depth must be >= the largest cutoff");

    EvalReport report;
    report.ks = std::move(ks);
    report.result_depth = result_depth;
    report.cases.resize(cases.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cases.size(); i = next++) {
            try {
                auto ranked = search(cases[i].query, result_depth);
                if (ranked.size() > result_depth) ranked.resize(result_depth);
                report.cases[i] = score_case(cases[i], i, ranked, report.ks);
            } catch (const std::exception& e) {
                CaseResult failed;
                failed.case_index = i;
                failed.query_type = cases[i].query_type;
                failed.failed = true;
                failed.error = e.what();
                report.cases[i] = std::move(failed);
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, cases.size());
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    for (const auto& r : report.cases) report.failed += r.failed;
    for (auto type : {QueryType::Keyword, QueryType::Task}) {
        auto s = summarize(report.cases, report.ks.size(), type);
        if (s.n > 0 || std::any_of(cases.begin(), cases.end(),
                                   [&](const auto& c) { return c.query_type == type; }))
            report.by_type[type] = std::move(s);
    }
    report.overall = summarize(report.cases, report.ks.size(), std::nullopt);
    return report;
}

namespace {

json summary_json(const MetricSummary& s, const std::vector<std::size_t>& ks) {
    json recall = json::object();
    for (std::size_t i = 0; i < ks.size(); ++i) recall[std::to_string(ks[i])] = s.recall[i];
    return {{"n", s.n}, {"recall", std::move(recall)}, {"mrr", s.mrr}, {"map", s.map}};
}

}  // namespace

std::string report_json(const EvalReport& report, int indent) {
    json by_type = json::object();
    for (const auto& [type, s] : report.by_type)
        by_type[std::string(to_string(type))] = summary_json(s, report.ks);
    json cases = json::array();
    for (const auto& r : report.cases) {
        json row = {{"case", r.case_index},
                    {"query_type", std::string(to_string(r.query_type))},
                    {"failed", r.failed}};
        if (r.failed) {
            row["error"] = r.error;
        } else {
            row["first_relevant_rank"] =
                r.first_relevant_rank ? json(*r.first_relevant_rank) : json(nullptr);
            row["reciprocal_rank"] = r.reciprocal_rank;
            row["average_precision"] = r.average_precision;
            json hits = json::object();
            json recall = json::object();
            for (std::size_t i = 0; i < report.ks.size(); ++i) {
                hits[std::to_string(report.ks[i])] = r.hits[i];
                recall[std::to_string(report.ks[i])] = r.recall[i];
            }
            row["hits"] = std::move(hits);
            row["recall"] = std::move(recall);
        }
        cases.push_back(std::move(row));
    }
    json doc = {{"ks", report.ks},
                {"result_depth", report.result_depth},
                {"by_type", std::move(by_type)},
                {"overall", summary_json(report.overall, report.ks)},
                {"failed", report.failed},
                {"cases", std::move(cases)}};
    return doc.dump(indent);
}

std::string report_table(const EvalReport& report) {
    std::string out;
    char buf[64];
    auto cell = [&](const char* fmt, auto v) {
        std::snprintf(buf, sizeof buf, fmt, v);
        out += buf;
    };
    cell("%-10s", "Queries");
    cell("%5s", "n");
    for (auto k : report.ks) cell("%8s", ("R@" + std::to_string(k)).c_str());
    cell("%8s", "MRR");
    cell("%8s", "MAP");
    out += '\n';
    auto row = [&](std::string_view label, const MetricSummary& s) {
        cell("%-10s", std::string(label).c_str());
        cell("%5zu", s.n);
        for (double v : s.recall) cell("%8.3f", v);
        cell("%8.3f", s.mrr);
        cell("%8.3f", s.map);
        out += '\n';
    };
    for (const auto& [type, s] : report.by_type) row(to_string(type), s);
    row("ALL", report.overall);
    if (report.failed > 0) out += "failed cases: " + std::to_string(report.failed) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Fuzzy matching

std::set<std::string> fuzzy_tokens(std::string_view text) {
    const auto tokens = tokenize(text);
    auto version_number = [](std::string_view t) -> std::optional<std::string> {
        if (!t.empty() && t.front() == 'v') t.remove_prefix(1);
        if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }))
            return std::nullopt;
        const auto nz = t.find_first_not_of('0');
        return nz == std::string_view::npos ? std::string("0") : std::string(t.substr(nz));
    };
    std::set<std::string> out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        if ((t == "v" || t == "version") && i + 1 < tokens.size() && version_number(tokens[i + 1]))
            continue;
        if (auto num = version_number(t)) out.insert(*num);
        else out.insert(t);
    }
    return out;
}

std::vector<std::string> fuzzy_match(std::string_view name, const Catalog& catalog,
                                     const FuzzyMatchOptions& options) {
    if (options.threshold < 0.0 || options.threshold > 1.0)
        throw InvalidArgument("fuzzy threshold must lie in [0, 1]");
    const auto name_tokens = fuzzy_tokens(name);
    const auto name_lower = detail::to_lower(name);
    std::vector<std::string> out;
    for (const auto& r : catalog.records()) {
        if (detail::find_word(name_lower, detail::to_lower(r.id)) != std::string::npos) {
            out.push_back(r.id);
            continue;
        }
        if (name_tokens.empty()) continue;
        const auto rec_tokens = fuzzy_tokens(r.title + " " + r.id);
        std::size_t inter = 0;
        for (const auto& t : name_tokens) inter += rec_tokens.count(t);
        const std::size_t uni = name_tokens.size() + rec_tokens.size() - inter;
        const double jaccard = static_cast<double>(inter) / static_cast<double>(uni);
        const bool contained = options.containment && inter == name_tokens.size();
        if (jaccard >= options.threshold || contained) out.push_back(r.id);
    }
    return out;
}

// ---------------------------------------------------------------------------
// URL patterns

std::vector<UrlPattern> url_patterns_from_json(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("url patterns: malformed JSON: ") + e.what());
    }
    if (!doc.is_array()) throw DataError("url patterns: expected a JSON array");
    std::vector<UrlPattern> out;
    for (const auto& item : doc) {
        try {
            UrlPattern p;
            p.name = item.at("name").get<std::string>();
            p.pattern = item.at("pattern").get<std::string>();
            p.regex = std::regex(p.pattern, std::regex::ECMAScript | std::regex::icase);
            if (p.regex.mark_count() < 1)
                throw DataError("url pattern '" + p.name + "' has no capture group");
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw DataError(std::string("url patterns: ") + e.what());
        } catch (const std::regex_error& e) {
            throw DataError(std::string("url patterns: bad regex: ") + e.what());
        }
    }
    return out;
}

std::vector<UrlPattern> load_url_patterns(const std::filesystem::path& path) {
    return url_patterns_from_json(detail::read_file(path));
}

std::vector<UrlPattern> default_url_patterns() {
    return url_patterns_from_json(asset("url_patterns.json"));
}

namespace {

// Lowercase id with leading zeros dropped from all-digit '_' segments, so
// "SPL3SMP_008" and a captured "spl3smp_8" compare equal.
std::string id_key(std::string_view id) {
    std::string out;
    std::size_t start = 0;
    while (start <= id.size()) {
        auto end = id.find('_', start);
        if (end == std::string_view::npos) end = id.size();
        auto seg = id.substr(start, end - start);
        const bool digits = !seg.empty() && std::all_of(seg.begin(), seg.end(), [](char c) {
            return c >= '0' && c <= '9';
        });
        if (digits) {
            const auto nz = seg.find_first_not_of('0');
            seg = nz == std::string_view::npos ? seg.substr(seg.size() - 1) : seg.substr(nz);
        }
        if (start) out += '_';
        out += detail::to_lower(seg);
        start = end + 1;
    }
    return out;
}

}  // namespace

std::optional<std::string> match_url(std::string_view url, const Catalog& catalog,
                                     const std::vector<UrlPattern>& patterns) {
    const std::string u(detail::trim(url));
    if (u.empty()) return std::nullopt;
    for (const auto& p : patterns) {
        std::smatch m;
        if (!std::regex_search(u, m, p.regex) || !m[1].matched) continue;
        std::string captured = m[1].str();
        for (std::size_t g = 2; g < m.size(); ++g)
            if (m[g].matched) captured += "_" + m[g].str();
        const auto key = id_key(captured);
        for (const auto& r : catalog.records())
            if (id_key(r.id) == key) return r.id;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Extraction records

ExtractionRecord parse_extraction(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("extraction: not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw DataError("extraction: expected a JSON object");
    for (const auto& [key, _] : doc.items()) {
        if (key != "datasets" && key != "keywords" && key != "is_original_keywords" &&
            key != "i_want_to")
            throw DataError("extraction: unknown key " + key);
    }
    for (const char* key : {"datasets", "keywords", "is_original_keywords", "i_want_to"})
        if (!doc.contains(key)) throw DataError(std::string("missing key ") + key);

    auto strings = [&](const char* key) {
        const auto& arr = doc.at(key);
        if (!arr.is_array()) throw DataError(std::string("extraction: ") + key + " must be an array");
        std::vector<std::string> out;
        for (const auto& v : arr) {
            if (!v.is_string())
                throw DataError(std::string("extraction: ") + key + " must contain only strings");
            out.push_back(v.get<std::string>());
        }
        return out;
    };

    ExtractionRecord rec;
    const auto& datasets = doc.at("datasets");
    if (!datasets.is_array()) throw DataError("extraction: datasets must be an array");
    for (const auto& d : datasets) {
        if (!d.is_object()) throw DataError("extraction: datasets entries must be objects");
        for (const auto& [key, _] : d.items())
            if (key != "name" && key != "doi_or_url")
                throw DataError("extraction: unknown key datasets[]." + key);
        if (!d.contains("name") || !d.at("name").is_string())
            throw DataError("extraction: datasets[].name must be a string");
        if (!d.contains("doi_or_url") || !d.at("doi_or_url").is_string())
            throw DataError("extraction: datasets[].doi_or_url must be a string");
        rec.datasets.push_back({d.at("name").get<std::string>(), d.at("doi_or_url").get<std::string>()});
    }
    rec.keywords = strings("keywords");
    if (!doc.at("is_original_keywords").is_boolean())
        throw DataError("extraction: is_original_keywords must be a boolean");
    rec.is_original_keywords = doc.at("is_original_keywords").get<bool>();
    rec.i_want_to = strings("i_want_to");
    return rec;
}

std::vector<BenchmarkCase> match_groundtruth(const ExtractionRecord& extraction,
                                             const Catalog& catalog,
                                             const std::vector<UrlPattern>& patterns,
                                             const FuzzyMatchOptions& options,
                                             std::string_view paper_id) {
    GroundTruth gt;
    for (const auto& d : extraction.datasets) {
        if (auto id = match_url(d.doi_or_url, catalog, patterns)) {
            gt.insert(*id);
            continue;
        }
        for (auto& id : fuzzy_match(d.name, catalog, options)) gt.insert(std::move(id));
    }
    std::vector<BenchmarkCase> cases;
    if (gt.empty()) return cases;

    std::vector<std::string> keywords;
    for (const auto& k : extraction.keywords)
        if (!detail::trim(k).empty()) keywords.emplace_back(detail::trim(k));
    if (!keywords.empty())
        cases.push_back({detail::join(keywords, " "), QueryType::Keyword, gt, std::string(paper_id)});
    for (const auto& s : extraction.i_want_to)
        if (!detail::trim(s).empty())
            cases.push_back({std::string(detail::trim(s)), QueryType::Task, gt, std::string(paper_id)});
    return cases;
}

}  // namespace esd
