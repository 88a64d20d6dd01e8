#include "esd/pipeline.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "esd/error.hpp"
#include "util.hpp"

namespace esd {

using nlohmann::json;

std::string_view to_string(FilterMode m) { return m == FilterMode::Soft ? "soft" : "hard"; }

std::optional<FilterMode> parse_filter_mode(std::string_view s) {
    const auto lower = detail::to_lower(s);
    if (lower == "soft") return FilterMode::Soft;
    if (lower == "hard") return FilterMode::Hard;
    return std::nullopt;
}

std::string_view to_string(FusionMethod m) { return m == FusionMethod::Rrf ? "rrf" : "weighted"; }

std::optional<FusionMethod> parse_fusion_method(std::string_view s) {
    const auto lower = detail::to_lower(s);
    if (lower == "rrf") return FusionMethod::Rrf;
    if (lower == "weighted") return FusionMethod::Weighted;
    return std::nullopt;
}

std::vector<std::string_view> Provenance::names() const {
    std::vector<std::string_view> out;
    if (has(Retriever::Lexical)) out.push_back("LEXICAL");
    if (has(Retriever::Semantic)) out.push_back("SEMANTIC");
    return out;
}

void FusionParams::validate() const {
    if (!(rrf_k > 0.0)) throw InvalidArgument("rrf_k must be > 0");
    if (pool_size == 0) throw InvalidArgument("pool size must be >= 1");
    if (lexical_weight < 0.0 || semantic_weight < 0.0)
        throw InvalidArgument("fusion weights must be non-negative");
}

// ---------------------------------------------------------------------------
// Recall

std::vector<ScoredCandidate> recall(const UnderstoodQuery& uq, const LexIndex& lex,
                                    const VecIndex& vec, const Embedder& embedder,
                                    const AbbrDict& dict, const FusionParams& params,
                                    const RecallOptions& options) {
    params.validate();
    if (lex.doc_ids() != vec.ids())
        throw InvalidArgument("lexical and vector indexes were built over different catalogs");

    auto run_lexical = [&] {
        return lexical_search(lex, uq.rewritten, dict, params.pool_size,
                              {.expand_query = options.expand_query});
    };
    auto run_semantic = [&] {
        return vector_search(vec, embedder, uq.rewritten, params.pool_size,
                             {.expand_query_with = options.expand_query ? &dict : nullptr});
    };

    std::vector<ScoredCandidate> lexical_hits;
    std::vector<ScoredCandidate> semantic_hits;
    if (options.parallel) {
        auto fut = std::async(std::launch::async, run_semantic);
        lexical_hits = run_lexical();
        semantic_hits = fut.get();
    } else {
        lexical_hits = run_lexical();
        semantic_hits = run_semantic();
    }

    std::vector<ScoredCandidate> out = std::move(lexical_hits);
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < out.size(); ++i) pos.emplace(out[i].id, i);
    for (auto& hit : semantic_hits) {
        if (auto it = pos.find(hit.id); it != pos.end()) {
            auto& c = out[it->second];
            c.provenance |= hit.provenance;
            c.semantic_rank = hit.semantic_rank;
            c.semantic_score = hit.semantic_score;
        } else {
            pos.emplace(hit.id, out.size());
            out.push_back(std::move(hit));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Constraint filtering

bool temporal_overlaps(const CatalogRecord& r, const DateRange& range) {
    if (r.temporal_start && *r.temporal_start > range.end) return false;
    if (r.temporal_end && *r.temporal_end < range.start) return false;
    return true;
}

namespace {

// Longitude extent as up to two ordinary intervals.
std::vector<std::pair<double, double>> lon_intervals(const BBox& b) {
    if (b.west <= b.east) return {{b.west, b.east}};
    return {{b.west, 180.0}, {-180.0, b.east}};
}

}  // namespace

bool spatial_overlaps(const BBox& a, const BBox& b) {
    if (a.north < b.south || b.north < a.south) return false;
    for (const auto& [aw, ae] : lon_intervals(a))
        for (const auto& [bw, be] : lon_intervals(b))
            if (aw <= be && bw <= ae) return true;
    return false;
}

std::vector<ScoredCandidate> filter_constraints(std::vector<ScoredCandidate> cands,
                                                const QueryConstraints& c, const Catalog& catalog,
                                                FilterMode mode) {
    if (c.empty()) return cands;
    auto passes = [&](const ScoredCandidate& cand) {
        const auto* r = catalog.find(cand.id);
        if (!r) return true;
        if (c.temporal && !temporal_overlaps(*r, *c.temporal)) return false;
        if (c.spatial && r->bbox && !spatial_overlaps(*r->bbox, *c.spatial)) return false;
        return true;
    };
    if (mode == FilterMode::Hard) {
        std::erase_if(cands, [&](const ScoredCandidate& cand) { return !passes(cand); });
        return cands;
    }
    for (auto& cand : cands)
        if (!passes(cand)) cand.demoted = true;
    std::stable_partition(cands.begin(), cands.end(),
                          [](const ScoredCandidate& cand) { return !cand.demoted; });
    return cands;
}

// ---------------------------------------------------------------------------
// Fusion

namespace {

struct MinMax {
    double lo = 0.0;
    double hi = 0.0;
    bool any = false;

    void add(double v) {
        if (!any) lo = hi = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        any = true;
    }
    double scale(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 1.0; }
};

}  // namespace

std::vector<ScoredCandidate> fuse(std::vector<ScoredCandidate> cands, const FusionParams& params) {
    params.validate();
    if (params.method == FusionMethod::Rrf) {
        for (auto& c : cands) {
            double s = 0.0;
            if (c.lexical_rank) s += 1.0 / (params.rrf_k + *c.lexical_rank);
            if (c.semantic_rank) s += 1.0 / (params.rrf_k + *c.semantic_rank);
            c.score = s;
        }
    } else {
        MinMax lex, sem;
        for (const auto& c : cands) {
            if (c.lexical_score) lex.add(*c.lexical_score);
            if (c.semantic_score) sem.add(*c.semantic_score);
        }
        for (auto& c : cands) {
            double s = 0.0;
            if (c.lexical_score) s += params.lexical_weight * lex.scale(*c.lexical_score);
            if (c.semantic_score) s += params.semantic_weight * sem.scale(*c.semantic_score);
            c.score = s;
        }
    }
    std::sort(cands.begin(), cands.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.demoted != b.demoted) return !a.demoted;
        return ranks_before(a, b);
    });
    return cands;
}

// ---------------------------------------------------------------------------
// Rerankers

BaselineReranker::BaselineReranker(double alpha, double beta, double gamma)
    : alpha_(alpha), beta_(beta), gamma_(gamma) {
    if (alpha < 0 || beta < 0 || gamma < 0)
        throw InvalidArgument("reranker weights must be non-negative");
}

namespace {

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : a) inter += b.count(t);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

std::set<std::string> token_set(std::string_view text) {
    auto tokens = tokenize(text);
    return {tokens.begin(), tokens.end()};
}

}  // namespace

std::vector<double> BaselineReranker::score(const std::string& query,
                                            std::span<const RerankInput> candidates) {
    MinMax fused;
    for (const auto& c : candidates) fused.add(c.fused_score);
    const auto q = token_set(query);
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        const double norm = fused.hi > fused.lo ? fused.scale(c.fused_score) : 0.0;
        out.push_back(alpha_ * norm + beta_ * jaccard(q, token_set(c.title)) +
                      gamma_ * jaccard(q, token_set(c.summary)));
    }
    return out;
}

LlmReranker::LlmReranker(LlmProvider& provider, std::string prompt_template, std::size_t batch_size)
    : provider_(provider), template_(std::move(prompt_template)), batch_size_(batch_size) {
    if (batch_size == 0) throw InvalidArgument("rerank batch size must be >= 1");
}

std::string LlmReranker::build_prompt(const std::string& query,
                                      std::span<const RerankInput> batch) const {
    constexpr std::size_t kSummaryChars = 600;
    std::string listing;
    for (const auto& c : batch) {
        json entry = {{"id", c.id},
                      {"title", c.title},
                      {"summary", c.summary.substr(0, kSummaryChars)}};
        listing += entry.dump() + "\n";
    }
    return fill_template(template_, {{"query", query}, {"candidates", listing}});
}

std::optional<std::vector<double>> parse_rerank_reply(std::string_view reply,
                                                      const std::vector<std::string>& ids) {
    const auto open = reply.find('[');
    const auto close = reply.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        return std::nullopt;
    json doc;
    try {
        doc = json::parse(reply.substr(open, close - open + 1));
    } catch (const json::parse_error&) {
        return std::nullopt;
    }
    std::unordered_map<std::string, double> by_id;
    for (const auto& item : doc) {
        if (!item.is_object()) return std::nullopt;
        auto id = item.find("id");
        auto score = item.find("score");
        if (id == item.end() || score == item.end() || !id->is_string() || !score->is_number())
            return std::nullopt;
        by_id[id->get<std::string>()] = score->get<double>();
    }
    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) return std::nullopt;
        out.push_back(it->second);
    }
    return out;
}

std::vector<double> LlmReranker::score(const std::string& query,
                                       std::span<const RerankInput> candidates) {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (std::size_t begin = 0; begin < candidates.size(); begin += batch_size_) {
        const auto batch = candidates.subspan(begin, std::min(batch_size_, candidates.size() - begin));
        std::vector<std::string> ids;
        for (const auto& c : batch) ids.push_back(c.id);
        const auto prompt = build_prompt(query, batch);

        std::optional<std::vector<double>> scores;
        std::string failure = "unparseable reply";
        for (int attempt = 0; attempt < 2 && !scores; ++attempt) {
            try {
                scores = parse_rerank_reply(provider_.complete(prompt), ids);
            } catch (const ProviderError& e) {
                failure = e.what();
            }
        }
        if (!scores) throw ProviderError("rerank batch failed: " + failure);
        out.insert(out.end(), scores->begin(), scores->end());
    }
    return out;
}

RerankOutcome rerank(const std::string& query, const std::vector<ScoredCandidate>& fused,
                     const Catalog& catalog, Reranker& reranker, std::size_t top_m) {
    if (top_m == 0) throw InvalidArgument("top_m must be >= 1");
    RerankOutcome outcome;
    outcome.ranked = fused;
    const std::size_t m = std::min(top_m, fused.size());
    if (m == 0) return outcome;

    std::vector<RerankInput> inputs;
    inputs.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        RerankInput in{fused[i].id, {}, {}, fused[i].score};
        if (const auto* r = catalog.find(fused[i].id)) {
            in.title = r->title;
            in.summary = r->summary;
        }
        inputs.push_back(std::move(in));
    }

    std::vector<double> scores;
    try {
        scores = reranker.score(query, inputs);
        if (scores.size() != m) throw ProviderError("reranker returned the wrong number of scores");
    } catch (const ProviderError& e) {
        outcome.degraded = true;
        outcome.warning = std::string("rerank: ") + e.what() + "; kept fused order";
        return outcome;
    }

    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (fused[a].demoted != fused[b].demoted) return !fused[a].demoted;
        return scores[a] > scores[b];
    });
    for (std::size_t i = 0; i < m; ++i) {
        outcome.ranked[i] = fused[order[i]];
        outcome.ranked[i].score = scores[order[i]];
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Engine and end-to-end search

Engine::Engine(Catalog catalog, AbbrDict dict, std::shared_ptr<const Embedder> embedder,
               const Bm25Params& bm25, std::size_t threads)
    : catalog_(std::move(catalog)),
      dict_(std::move(dict)),
      embedder_(std::move(embedder)),
      lex_(build_lexical_index(catalog_, dict_, bm25)),
      vec_(build_vector_index(catalog_, *embedder_, dict_, threads)) {}

Engine::Engine(Catalog catalog, AbbrDict dict, std::shared_ptr<const Embedder> embedder,
               LexIndex lexical, std::size_t threads)
    : catalog_(std::move(catalog)),
      dict_(std::move(dict)),
      embedder_(std::move(embedder)),
      lex_(std::move(lexical)),
      vec_(build_vector_index(catalog_, *embedder_, dict_, threads)) {
    if (lex_.doc_ids() != vec_.ids())
        throw DataError("lexical index does not match the catalog (ids or order differ)");
}

SearchResponse search(std::string_view query, const Engine& engine, const SearchConfig& config,
                      Reranker& reranker) {
    SearchResponse resp;
    resp.understood = understand(query, config.understanding);
    resp.warnings = resp.understood.warnings;

    auto cands = recall(resp.understood, engine.lexical(), engine.vectors(), engine.embedder(),
                        engine.dict(), config.fusion,
                        {.expand_query = config.expand_query, .parallel = config.parallel_recall});
    resp.counts.recalled = cands.size();
    for (const auto& c : cands) {
        resp.counts.lexical += c.provenance.has(Retriever::Lexical);
        resp.counts.semantic += c.provenance.has(Retriever::Semantic);
    }

    cands = filter_constraints(std::move(cands), resp.understood.constraints, engine.catalog(),
                               config.filter_mode);
    resp.counts.filtered = cands.size();
    resp.counts.demoted = static_cast<std::size_t>(
        std::count_if(cands.begin(), cands.end(), [](const auto& c) { return c.demoted; }));

    auto fused = fuse(std::move(cands), config.fusion);
    auto outcome = rerank(resp.understood.original, fused, engine.catalog(), reranker, config.top_m);
    resp.rerank_degraded = outcome.degraded;
    if (outcome.warning) resp.warnings.push_back(*outcome.warning);
    resp.counts.reranked = outcome.degraded ? 0 : std::min(config.top_m, fused.size());

    resp.results = std::move(outcome.ranked);
    if (resp.results.size() > config.result_k) resp.results.resize(config.result_k);
    resp.counts.returned = resp.results.size();
    return resp;
}

std::string search_response_json(const SearchResponse& resp, bool explain, int indent) {
    json results = json::array();
    for (std::size_t i = 0; i < resp.results.size(); ++i) {
        const auto& c = resp.results[i];
        json prov = json::array();
        for (auto name : c.provenance.names()) prov.push_back(std::string(name));
        results.push_back({{"id", c.id},
                           {"score", c.score},
                           {"rank", i + 1},
                           {"provenance", std::move(prov)},
                           {"demoted", c.demoted}});
    }
    if (!explain) return results.dump(indent);

    const auto& uq = resp.understood;
    json constraints = json::object();
    if (uq.constraints.temporal)
        constraints["temporal"] = {format_date(uq.constraints.temporal->start),
                                   format_date(uq.constraints.temporal->end)};
    if (uq.constraints.spatial) {
        const auto& b = *uq.constraints.spatial;
        constraints["spatial"] = {b.west, b.south, b.east, b.north};
    }
    json understood = {{"original", uq.original},
                       {"intent", std::string(to_string(uq.intent))},
                       {"rewritten", uq.rewritten},
                       {"constraints", std::move(constraints)}};
    if (uq.rewrite_reasoning) understood["rewrite_reasoning"] = *uq.rewrite_reasoning;

    json doc = {{"results", std::move(results)},
                {"explain",
                 {{"understood_query", std::move(understood)},
                  {"stage_counts",
                   {{"lexical", resp.counts.lexical},
                    {"semantic", resp.counts.semantic},
                    {"recalled", resp.counts.recalled},
                    {"after_filter", resp.counts.filtered},
                    {"demoted", resp.counts.demoted},
                    {"reranked", resp.counts.reranked},
                    {"returned", resp.counts.returned}}},
                  {"rerank_degraded", resp.rerank_degraded},
                  {"warnings", resp.warnings}}}};
    return doc.dump(indent);
}

}  // namespace esd
