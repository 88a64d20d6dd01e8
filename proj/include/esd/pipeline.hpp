#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esd/candidate.hpp"
#include "esd/catalog.hpp"
#include "esd/lexical.hpp"
#include "esd/provider.hpp"
#include "esd/semantic.hpp"
#include "esd/textproc.hpp"
#include "esd/understanding.hpp"

namespace esd {

enum class FilterMode { Soft, Hard };
std::string_view to_string(FilterMode m);
std::optional<FilterMode> parse_filter_mode(std::string_view s);

enum class FusionMethod { Rrf, Weighted };
std::string_view to_string(FusionMethod m);
std::optional<FusionMethod> parse_fusion_method(std::string_view s);

struct FusionParams {
    double rrf_k = 60.0;
    std::size_t pool_size = 100;
    FusionMethod method = FusionMethod::Rrf;
    // Weighted method only: weights on min-max normalized per-source scores.
    double lexical_weight = 0.5;
    double semantic_weight = 0.5;

    void validate() const;
};

struct RecallOptions {
    bool expand_query = false;
    bool parallel = false;
};

/// Union of the lexical and semantic top-`pool_size` lists for the rewritten
/// query, keyed by id with merged provenance and per-source ranks. Lexical
/// hits come first in lexical order, then semantic-only hits in semantic
/// order.
std::vector<ScoredCandidate> recall(const UnderstoodQuery& uq, const LexIndex& lex,
                                    const VecIndex& vec, const Embedder& embedder,
                                    const AbbrDict& dict, const FusionParams& params,
                                    const RecallOptions& options = {});

/// HARD drops candidates whose present temporal/spatial metadata misses a
/// present constraint; SOFT keeps them but flags them `demoted` and moves
/// them after the passing ones (stable). Records without the relevant field
/// always pass.
std::vector<ScoredCandidate> filter_constraints(std::vector<ScoredCandidate> cands,
                                                const QueryConstraints& constraints,
                                                const Catalog& catalog, FilterMode mode);

bool temporal_overlaps(const CatalogRecord& record, const DateRange& range);
bool spatial_overlaps(const BBox& a, const BBox& b);

/// Reciprocal rank fusion: sum of 1 / (rrf_k + rank) over the sources that
/// ranked the candidate. Sorted by score descending, ties by id; demoted
/// candidates stay behind non-demoted ones.
std::vector<ScoredCandidate> fuse(std::vector<ScoredCandidate> cands, const FusionParams& params);

struct RerankInput {
    std::string id;
    std::string title;
    std::string summary;
    double fused_score = 0.0;
};

/// Scores candidates against the user's original query. Must return one
/// score per input or throw.
class Reranker {
public:
    virtual ~Reranker() = default;
    virtual std::vector<double> score(const std::string& query,
                                      std::span<const RerankInput> candidates) = 0;
};

/// alpha * minmax(fused) + beta * Jaccard(query, title) + gamma * Jaccard(query, summary)
/// over token sets.
class BaselineReranker : public Reranker {
public:
    BaselineReranker(double alpha = 0.5, double beta = 0.3, double gamma = 0.2);
    std::vector<double> score(const std::string& query,
                              std::span<const RerankInput> candidates) override;

private:
    double alpha_, beta_, gamma_;
};

/// Batches of up to `batch_size` candidates are sent to an LlmProvider using
/// the rerank template; the reply must be a JSON array of {"id", "score"}
/// covering every candidate in the batch. One retry per batch, then
/// ProviderError.
class LlmReranker : public Reranker {
public:
    LlmReranker(LlmProvider& provider, std::string prompt_template, std::size_t batch_size = 20);
    std::vector<double> score(const std::string& query,
                              std::span<const RerankInput> candidates) override;

    std::string build_prompt(const std::string& query, std::span<const RerankInput> batch) const;

private:
    LlmProvider& provider_;
    std::string template_;
    std::size_t batch_size_;
};

/// Parses [{"id": "...", "score": n}, ...] into scores aligned with `ids`.
/// Returns nullopt when any id is missing or the payload is malformed.
std::optional<std::vector<double>> parse_rerank_reply(std::string_view reply,
                                                      const std::vector<std::string>& ids);

struct RerankOutcome {
    std::vector<ScoredCandidate> ranked;
    bool degraded = false;
    std::optional<std::string> warning;
};

/// Re-scores the first `top_m` fused candidates and reorders them by
/// reranker score (ties keep fused order); the rest follow in fused order.
/// Demoted candidates are never lifted above non-demoted ones. A reranker
/// failure returns the fused order with `degraded` set.
RerankOutcome rerank(const std::string& query, const std::vector<ScoredCandidate>& fused,
                     const Catalog& catalog, Reranker& reranker, std::size_t top_m);

/// Immutable search state: catalog, abbreviations, and both indexes.
class Engine {
public:
    Engine(Catalog catalog, AbbrDict dict, std::shared_ptr<const Embedder> embedder,
           const Bm25Params& bm25 = {}, std::size_t threads = 1);
    /// Uses a previously built lexical index; its doc ids must equal the
    /// catalog order.
    Engine(Catalog catalog, AbbrDict dict, std::shared_ptr<const Embedder> embedder,
           LexIndex lexical, std::size_t threads = 1);

    const Catalog& catalog() const { return catalog_; }
    const AbbrDict& dict() const { return dict_; }
    const LexIndex& lexical() const { return lex_; }
    const VecIndex& vectors() const { return vec_; }
    const Embedder& embedder() const { return *embedder_; }

private:
    Catalog catalog_;
    AbbrDict dict_;
    std::shared_ptr<const Embedder> embedder_;
    LexIndex lex_;
    VecIndex vec_;
};

struct SearchConfig {
    UnderstandingConfig understanding;
    FusionParams fusion;
    FilterMode filter_mode = FilterMode::Soft;
    std::size_t top_m = 50;
    std::size_t result_k = 100;
    bool expand_query = false;
    bool parallel_recall = false;
};

struct StageCounts {
    std::size_t lexical = 0;
    std::size_t semantic = 0;
    std::size_t recalled = 0;
    std::size_t filtered = 0;
    std::size_t demoted = 0;
    std::size_t reranked = 0;
    std::size_t returned = 0;
};

struct SearchResponse {
    UnderstoodQuery understood;
    std::vector<ScoredCandidate> results;
    StageCounts counts;
    std::vector<std::string> warnings;
    bool rerank_degraded = false;
};

/// understand -> recall -> filter_constraints -> fuse -> rerank, truncated to
/// result_k. Only the empty-query error escapes; provider failures degrade.
SearchResponse search(std::string_view query, const Engine& engine, const SearchConfig& config,
                      Reranker& reranker);

/// JSON array of {"id","score","rank","provenance","demoted"}; with
/// `explain` the array is wrapped in {"results": [...], "explain": {...}}.
std::string search_response_json(const SearchResponse& response, bool explain, int indent = -1);

}  // namespace esd
