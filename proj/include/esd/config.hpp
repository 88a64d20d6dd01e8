#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "esd/evalbench.hpp"
#include "esd/lexical.hpp"
#include "esd/pipeline.hpp"
#include "esd/provider.hpp"

namespace esd {

inline constexpr std::string_view kVersion = "0.1.0";

/// Every tunable of an engine run. Loaded from a flat JSON object whose keys
/// are the member names below; unknown keys are rejected. Relative paths in
/// a config file resolve against the file's directory. Empty path means
/// "use the built-in default".
struct EngineConfig {
    std::filesystem::path catalog;
    std::filesystem::path abbr_dict;
    std::filesystem::path variable_map;
    std::filesystem::path gazetteer;
    std::filesystem::path topics;
    std::filesystem::path regions;
    std::filesystem::path url_patterns;
    std::filesystem::path lexical_index;
    std::filesystem::path intent_prompt;
    std::filesystem::path rewrite_prompt;
    std::filesystem::path rerank_prompt;

    Bm25Params bm25;

    std::string embedder = "hash";  // hash | remote
    std::size_t embedding_dim = 256;
    std::string embedding_endpoint;
    std::string embedding_model;

    FusionParams fusion;
    FilterMode filter = FilterMode::Soft;
    std::size_t top_m = 50;
    std::size_t result_k = 100;
    bool expand_queries = false;
    bool normalize_variables = true;
    std::size_t threads = 1;

    StageMode intent_mode = StageMode::Rules;
    StageMode rewrite_mode = StageMode::Rules;

    std::string reranker = "baseline";  // baseline | llm
    double rerank_alpha = 0.5;
    double rerank_beta = 0.3;
    double rerank_gamma = 0.2;
    std::size_t rerank_batch = 20;

    std::string provider = "none";  // none | stub | remote
    std::string provider_endpoint;
    std::string provider_model;
    std::filesystem::path stub_table;

    double fuzzy_threshold = 0.85;

    /// Checks cross-field and per-field invariants; throws InvalidArgument.
    void validate() const;

    /// Overlays the keys present in `json_text` onto `*this`.
    void merge_json(std::string_view json_text, const std::filesystem::path& base_dir = {});
    void merge_file(const std::filesystem::path& path);
};

/// Environment variables read for secrets and endpoint overrides.
inline constexpr const char* kEnvApiKey = "ESDSEARCH_API_KEY";
inline constexpr const char* kEnvEndpoint = "ESDSEARCH_ENDPOINT";

/// Everything a search or evaluation run needs, assembled from a config.
class Runtime {
public:
    explicit Runtime(const EngineConfig& config);

    const Engine& engine() const { return *engine_; }
    const SearchConfig& search_config() const { return search_config_; }
    SearchResponse search(std::string_view query) const;
    /// Ranked ids only; the evaluation adapter.
    std::vector<std::string> ranked_ids(const std::string& query, std::size_t depth) const;

private:
    std::unique_ptr<LlmProvider> provider_;
    std::unique_ptr<Engine> engine_;
    SearchConfig search_config_;
    std::string rerank_prompt_;
    double alpha_, beta_, gamma_;
    std::size_t rerank_batch_;
    bool llm_rerank_ = false;
};

/// Loads the catalog named by the config, applying variable normalization
/// when enabled.
Catalog load_catalog(const EngineConfig& config);
AbbrDict load_abbr_dict(const EngineConfig& config);

}  // namespace esd
