#include "esd/config.hpp"

#include <cstdlib>
#include <functional>
#include <map>

#include <json.hpp>

#include "esd/error.hpp"
#include "util.hpp"

namespace esd {

using nlohmann::json;

namespace {

using Setter = std::function<void(EngineConfig&, const json&, const std::filesystem::path&)>;

template <typename T>
T typed(const json& v, const std::string& key) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw DataError("");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw DataError("");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || v.get<long long>() < 0) throw DataError("");
        } else {
            if (!v.is_number()) throw DataError("");
        }
        return v.get<T>();
    } catch (const std::exception&) {
        throw DataError("config: wrong type for '" + key + "'");
    }
}

Setter path_setter(std::filesystem::path EngineConfig::*member) {
    return [member](EngineConfig& c, const json& v, const std::filesystem::path& base) {
        std::filesystem::path p = typed<std::string>(v, "path");
        c.*member = (p.empty() || p.is_absolute() || base.empty()) ? p : base / p;
    };
}

template <typename T>
Setter value_setter(T EngineConfig::*member, std::string key) {
    return [member, key](EngineConfig& c, const json& v, const std::filesystem::path&) {
        c.*member = typed<T>(v, key);
    };
}

template <typename E, typename Parse>
Setter enum_setter(E EngineConfig::*member, std::string key, Parse parse) {
    return [member, key, parse](EngineConfig& c, const json& v, const std::filesystem::path&) {
        auto parsed = parse(typed<std::string>(v, key));
        if (!parsed) throw DataError("config: invalid value for '" + key + "'");
        c.*member = *parsed;
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        t["catalog"] = path_setter(&EngineConfig::catalog);
        t["abbr_dict"] = path_setter(&EngineConfig::abbr_dict);
        t["variable_map"] = path_setter(&EngineConfig::variable_map);
        t["gazetteer"] = path_setter(&EngineConfig::gazetteer);
        t["topics"] = path_setter(&EngineConfig::topics);
        t["regions"] = path_setter(&EngineConfig::regions);
        t["url_patterns"] = path_setter(&EngineConfig::url_patterns);
        t["lexical_index"] = path_setter(&EngineConfig::lexical_index);
        t["intent_prompt"] = path_setter(&EngineConfig::intent_prompt);
        t["rewrite_prompt"] = path_setter(&EngineConfig::rewrite_prompt);
        t["rerank_prompt"] = path_setter(&EngineConfig::rerank_prompt);
        t["stub_table"] = path_setter(&EngineConfig::stub_table);
        t["bm25_k1"] = [](EngineConfig& c, const json& v, const auto&) { c.bm25.k1 = typed<double>(v, "bm25_k1"); };
        t["bm25_b"] = [](EngineConfig& c, const json& v, const auto&) { c.bm25.b = typed<double>(v, "bm25_b"); };
        t["embedder"] = value_setter(&EngineConfig::embedder, "embedder");
        t["embedding_dim"] = value_setter(&EngineConfig::embedding_dim, "embedding_dim");
        t["embedding_endpoint"] = value_setter(&EngineConfig::embedding_endpoint, "embedding_endpoint");
        t["embedding_model"] = value_setter(&EngineConfig::embedding_model, "embedding_model");
        t["fusion"] = [](EngineConfig& c, const json& v, const auto&) {
            auto m = parse_fusion_method(typed<std::string>(v, "fusion"));
            if (!m) throw DataError("config: invalid value for 'fusion'");
            c.fusion.method = *m;
        };
        t["rrf_k"] = [](EngineConfig& c, const json& v, const auto&) { c.fusion.rrf_k = typed<double>(v, "rrf_k"); };
        t["pool_size"] = [](EngineConfig& c, const json& v, const auto&) {
            c.fusion.pool_size = typed<std::size_t>(v, "pool_size");
        };
        t["lexical_weight"] = [](EngineConfig& c, const json& v, const auto&) {
            c.fusion.lexical_weight = typed<double>(v, "lexical_weight");
        };
        t["semantic_weight"] = [](EngineConfig& c, const json& v, const auto&) {
            c.fusion.semantic_weight = typed<double>(v, "semantic_weight");
        };
        t["filter"] = enum_setter(&EngineConfig::filter, "filter", parse_filter_mode);
        t["top_m"] = value_setter(&EngineConfig::top_m, "top_m");
        t["result_k"] = value_setter(&EngineConfig::result_k, "result_k");
        t["expand_queries"] = value_setter(&EngineConfig::expand_queries, "expand_queries");
        t["normalize_variables"] = value_setter(&EngineConfig::normalize_variables, "normalize_variables");
        t["threads"] = value_setter(&EngineConfig::threads, "threads");
        t["intent_mode"] = enum_setter(&EngineConfig::intent_mode, "intent_mode", parse_stage_mode);
        t["rewrite_mode"] = enum_setter(&EngineConfig::rewrite_mode, "rewrite_mode", parse_stage_mode);
        t["reranker"] = value_setter(&EngineConfig::reranker, "reranker");
        t["rerank_alpha"] = value_setter(&EngineConfig::rerank_alpha, "rerank_alpha");
        t["rerank_beta"] = value_setter(&EngineConfig::rerank_beta, "rerank_beta");
        t["rerank_gamma"] = value_setter(&EngineConfig::rerank_gamma, "rerank_gamma");
        t["rerank_batch"] = value_setter(&EngineConfig::rerank_batch, "rerank_batch");
        t["provider"] = value_setter(&EngineConfig::provider, "provider");
        t["provider_endpoint"] = value_setter(&EngineConfig::provider_endpoint, "provider_endpoint");
        t["provider_model"] = value_setter(&EngineConfig::provider_model, "provider_model");
        t["fuzzy_threshold"] = value_setter(&EngineConfig::fuzzy_threshold, "fuzzy_threshold");
        return t;
    }();
    return table;
}

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
}

}  // namespace

void EngineConfig::validate() const {
    bm25.validate();
    fusion.validate();
    if (embedder != "hash" && embedder != "remote")
        throw InvalidArgument("embedder must be 'hash' or 'remote'");
    if (embedding_dim == 0) throw InvalidArgument("embedding_dim must be >= 1");
    if (top_m == 0) throw InvalidArgument("top_m must be >= 1");
    if (result_k == 0) throw InvalidArgument("result_k must be >= 1");
    if (threads == 0) throw InvalidArgument("threads must be >= 1");
    if (reranker != "baseline" && reranker != "llm")
        throw InvalidArgument("reranker must be 'baseline' or 'llm'");
    if (rerank_alpha < 0 || rerank_beta < 0 || rerank_gamma < 0)
        throw InvalidArgument("rerank weights must be non-negative");
    if (rerank_batch == 0) throw InvalidArgument("rerank_batch must be >= 1");
    if (provider != "none" && provider != "stub" && provider != "remote")
        throw InvalidArgument("provider must be 'none', 'stub' or 'remote'");
    const bool needs_provider = intent_mode == StageMode::Provider ||
                                rewrite_mode == StageMode::Provider || reranker == "llm";
    if (needs_provider && provider == "none")
        throw InvalidArgument("provider-driven stages need provider 'stub' or 'remote'");
    if (provider == "stub" && stub_table.empty())
        throw InvalidArgument("provider 'stub' needs a stub_table");
    if (fuzzy_threshold < 0.0 || fuzzy_threshold > 1.0)
        throw InvalidArgument("fuzzy_threshold must lie in [0, 1]");
}

void EngineConfig::merge_json(std::string_view json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("config: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw DataError("config: expected a JSON object");
    const auto& table = setters();
    for (const auto& [key, value] : doc.items()) {
        auto it = table.find(key);
        if (it == table.end()) throw DataError("config: unknown key '" + key + "'");
        it->second(*this, value, base_dir);
    }
}

void EngineConfig::merge_file(const std::filesystem::path& path) {
    merge_json(detail::read_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Runtime

Catalog load_catalog(const EngineConfig& config) {
    if (config.catalog.empty()) throw InvalidArgument("no catalog given");
    auto catalog = ingest_records(config.catalog);
    if (!config.normalize_variables) return catalog;
    const auto vmap = config.variable_map.empty() ? VariableMap::defaults()
                                                  : VariableMap::load(config.variable_map);
    Catalog normalized;
    for (const auto& r : catalog.records()) normalized.add(normalize_variables(r, vmap));
    return normalized;
}

AbbrDict load_abbr_dict(const EngineConfig& config) {
    return config.abbr_dict.empty() ? AbbrDict::defaults() : AbbrDict::load(config.abbr_dict);
}

Runtime::Runtime(const EngineConfig& config)
    : alpha_(config.rerank_alpha),
      beta_(config.rerank_beta),
      gamma_(config.rerank_gamma),
      rerank_batch_(config.rerank_batch),
      llm_rerank_(config.reranker == "llm") {
    config.validate();

    const auto api_key = env_or_empty(kEnvApiKey);
    if (config.provider == "stub") {
        provider_ = std::make_unique<StubLlmProvider>(StubLlmProvider::load(config.stub_table));
    } else if (config.provider == "remote") {
        HttpSettings http;
        http.endpoint = env_or_empty(kEnvEndpoint);
        if (http.endpoint.empty()) http.endpoint = config.provider_endpoint;
        if (http.endpoint.empty()) throw InvalidArgument("remote provider needs an endpoint");
        http.api_key = api_key;
        provider_ = std::make_unique<HttpLlmProvider>(http, config.provider_model);
    }

    std::shared_ptr<const Embedder> embedder;
    if (config.embedder == "hash") {
        embedder = std::make_shared<HashEmbedder>(config.embedding_dim);
    } else {
        if (config.embedding_endpoint.empty()) throw InvalidArgument("remote embedder needs an endpoint");
        embedder = std::make_shared<HttpEmbedder>(HttpSettings{config.embedding_endpoint, api_key},
                                                  config.embedding_dim, config.embedding_model);
    }

    auto catalog = load_catalog(config);
    auto dict = load_abbr_dict(config);
    if (config.lexical_index.empty()) {
        engine_ = std::make_unique<Engine>(std::move(catalog), std::move(dict), embedder, config.bm25,
                                           config.threads);
    } else {
        engine_ = std::make_unique<Engine>(std::move(catalog), std::move(dict), embedder,
                                           load_lexical_index(config.lexical_index), config.threads);
    }

    auto& u = search_config_.understanding;
    u.intent_mode = config.intent_mode;
    u.rewrite_mode = config.rewrite_mode;
    u.provider = provider_.get();
    if (!config.gazetteer.empty()) u.gazetteer = Gazetteer::load(config.gazetteer);
    if (!config.topics.empty()) u.topics = TopicMap::load(config.topics);
    if (!config.regions.empty()) u.regions = RegionGazetteer::load(config.regions);
    if (!config.intent_prompt.empty()) u.prompts.intent = detail::read_file(config.intent_prompt);
    if (!config.rewrite_prompt.empty()) u.prompts.rewrite = detail::read_file(config.rewrite_prompt);
    if (!config.rerank_prompt.empty()) u.prompts.rerank = detail::read_file(config.rerank_prompt);
    rerank_prompt_ = u.prompts.rerank;

    search_config_.fusion = config.fusion;
    search_config_.filter_mode = config.filter;
    search_config_.top_m = config.top_m;
    search_config_.result_k = config.result_k;
    search_config_.expand_query = config.expand_queries;
}

SearchResponse Runtime::search(std::string_view query) const {
    if (llm_rerank_) {
        LlmReranker reranker(*provider_, rerank_prompt_, rerank_batch_);
        return esd::search(query, *engine_, search_config_, reranker);
    }
    BaselineReranker reranker(alpha_, beta_, gamma_);
    return esd::search(query, *engine_, search_config_, reranker);
}

std::vector<std::string> Runtime::ranked_ids(const std::string& query, std::size_t depth) const {
    auto resp = search(query);
    std::vector<std::string> ids;
    for (const auto& c : resp.results) {
        if (ids.size() >= depth) break;
        ids.push_back(c.id);
    }
    return ids;
}

}  // namespace esd
