#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esd/candidate.hpp"
#include "esd/catalog.hpp"
#include "esd/provider.hpp"
#include "esd/textproc.hpp"

namespace esd {

using Vector = std::vector<double>;

/// Text embedding contract. embed() must be deterministic and safe to call
/// concurrently on a const instance.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    virtual Vector embed(std::string_view text) const = 0;
};

/// Feature-hashing embedder: FNV-1a 64 of each token modulo D gives a bucket,
/// bucket counts are L2-normalized. Empty token streams give the zero vector.
class HashEmbedder : public Embedder {
public:
    explicit HashEmbedder(std::size_t dimension = 256);

    std::size_t dimension() const override { return dimension_; }
    Vector embed(std::string_view text) const override;

private:
    std::size_t dimension_;
};

/// Remote embedding service: POST {"input": [text]} to the endpoint, read
/// data[0].embedding. Length mismatches are ProviderErrors.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(HttpSettings settings, std::size_t dimension, std::string model = {});

    std::size_t dimension() const override { return dimension_; }
    Vector embed(std::string_view text) const override;

private:
    HttpSettings settings_;
    std::size_t dimension_;
    std::string model_;
};

/// Dense matrix of unit (or zero) rows, one per catalog record in catalog
/// order.
class VecIndex {
public:
    VecIndex(std::size_t dimension, std::vector<std::string> ids, std::vector<double> rows);

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const double> row(std::size_t i) const {
        return {rows_.data() + i * dimension_, dimension_};
    }

private:
    std::size_t dimension_;
    std::vector<std::string> ids_;
    std::vector<double> rows_;
};

/// Returns `v` scaled to unit length, or unchanged when it is all zeros.
Vector l2_normalize(Vector v);

/// Embeds indexed_text(record) after abbreviation expansion for every record.
/// `threads` > 1 embeds concurrently; row order is always catalog order. A
/// ProviderError aborts the build naming the (first) failing record id.
VecIndex build_vector_index(const Catalog& catalog, const Embedder& embedder,
                            const AbbrDict& dict, std::size_t threads = 1);

VecIndex build_vector_index_from_texts(const std::vector<std::string>& ids,
                                       const std::vector<std::string>& texts,
                                       const Embedder& embedder, const AbbrDict& dict,
                                       std::size_t threads = 1);

struct VectorSearchOptions {
    /// When set, the query is abbreviation-expanded before embedding.
    const AbbrDict* expand_query_with = nullptr;
};

/// Exact cosine similarity against every nonzero row; top-k descending,
/// ties by ascending id. A zero query vector yields no results.
std::vector<ScoredCandidate> vector_search(const VecIndex& index, const Embedder& embedder,
                                           std::string_view query, std::size_t k,
                                           const VectorSearchOptions& options = {});

}  // namespace esd
