#include "esd/semantic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <thread>

#include <json.hpp>

#include "esd/error.hpp"
#include "esd/lexical.hpp"
#include "util.hpp"

namespace esd {

Vector l2_normalize(Vector v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq == 0.0) return v;
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
    return v;
}

HashEmbedder::HashEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw InvalidArgument("embedding dimension must be >= 1");
}

Vector HashEmbedder::embed(std::string_view text) const {
    Vector v(dimension_, 0.0);
    for (const auto& token : tokenize(text)) v[detail::fnv1a64(token) % dimension_] += 1.0;
    return l2_normalize(std::move(v));
}

HttpEmbedder::HttpEmbedder(HttpSettings settings, std::size_t dimension, std::string model)
    : settings_(std::move(settings)), dimension_(dimension), model_(std::move(model)) {
    if (dimension == 0) throw InvalidArgument("embedding dimension must be >= 1");
}

Vector HttpEmbedder::embed(std::string_view text) const {
    nlohmann::json body = {{"input", nlohmann::json::array({std::string(text)})}};
    if (!model_.empty()) body["model"] = model_;
    const auto reply = http_post_json(settings_, body.dump());
    Vector v;
    try {
        v = nlohmann::json::parse(reply).at("data").at(0).at("embedding").get<Vector>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("unexpected embedding response: ") + e.what());
    }
    if (v.size() != dimension_) {
        throw ProviderError("embedding has length " + std::to_string(v.size()) + ", expected " +
                            std::to_string(dimension_));
    }
    return v;
}

VecIndex::VecIndex(std::size_t dimension, std::vector<std::string> ids, std::vector<double> rows)
    : dimension_(dimension), ids_(std::move(ids)), rows_(std::move(rows)) {
    if (rows_.size() != ids_.size() * dimension_)
        throw InvalidArgument("vector index rows do not match ids x dimension");
}

VecIndex build_vector_index_from_texts(const std::vector<std::string>& ids,
                                       const std::vector<std::string>& texts,
                                       const Embedder& embedder, const AbbrDict& dict,
                                       std::size_t threads) {
    if (ids.empty()) throw InvalidArgument("nothing to index");
    if (ids.size() != texts.size()) throw InvalidArgument("ids and texts differ in length");
    const std::size_t dim = embedder.dimension();
    std::vector<double> rows(ids.size() * dim, 0.0);

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::optional<std::pair<std::size_t, std::string>> first_error;

    auto worker = [&] {
        for (std::size_t i = next++; i < ids.size(); i = next++) {
            try {
                auto v = embedder.embed(expand_abbreviations(texts[i], dict));
                if (v.size() != dim)
                    throw ProviderError("embedder returned " + std::to_string(v.size()) +
                                        " values, expected " + std::to_string(dim));
                v = l2_normalize(std::move(v));
                std::copy(v.begin(), v.end(), rows.begin() + static_cast<std::ptrdiff_t>(i * dim));
            } catch (const ProviderError& e) {
                std::lock_guard lock(err_mu);
                if (!first_error || i < first_error->first) first_error.emplace(i, e.what());
            }
        }
    };

    const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, ids.size());
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (first_error) {
        throw ProviderError("embedding failed for record '" + ids[first_error->first] +
                            "': " + first_error->second);
    }
    return VecIndex(dim, ids, std::move(rows));
}

VecIndex build_vector_index(const Catalog& catalog, const Embedder& embedder,
                            const AbbrDict& dict, std::size_t threads) {
    if (catalog.empty()) throw InvalidArgument("nothing to index");
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    for (const auto& r : catalog.records()) {
        ids.push_back(r.id);
        texts.push_back(indexed_text(r));
    }
    return build_vector_index_from_texts(ids, texts, embedder, dict, threads);
}

std::vector<ScoredCandidate> vector_search(const VecIndex& index, const Embedder& embedder,
                                           std::string_view query, std::size_t k,
                                           const VectorSearchOptions& options) {
    if (k == 0) throw InvalidArgument("k must be >= 1");
    if (embedder.dimension() != index.dimension()) {
        throw InvalidArgument("embedder dimension " + std::to_string(embedder.dimension()) +
                              " does not match index dimension " +
                              std::to_string(index.dimension()));
    }
    const auto q = l2_normalize(options.expand_query_with
                                    ? embedder.embed(expand_abbreviations(query, *options.expand_query_with))
                                    : embedder.embed(query));
    if (q.size() != index.dimension()) throw ProviderError("query embedding has wrong length");
    if (std::all_of(q.begin(), q.end(), [](double x) { return x == 0.0; })) return {};

    std::vector<ScoredCandidate> hits;
    hits.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto row = index.row(i);
        double dot = 0.0;
        bool nonzero = false;
        for (std::size_t d = 0; d < row.size(); ++d) {
            dot += q[d] * row[d];
            nonzero = nonzero || row[d] != 0.0;
        }
        if (!nonzero) continue;
        ScoredCandidate c;
        c.id = index.ids()[i];
        c.score = dot;
        c.semantic_score = dot;
        c.provenance = Provenance(Retriever::Semantic);
        hits.push_back(std::move(c));
    }
    const auto keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      ranks_before);
    hits.resize(keep);
    for (std::size_t i = 0; i < hits.size(); ++i)
        hits[i].semantic_rank = static_cast<std::uint32_t>(i + 1);
    return hits;
}

}  // namespace esd
