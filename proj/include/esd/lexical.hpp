#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "esd/candidate.hpp"
#include "esd/catalog.hpp"
#include "esd/textproc.hpp"

namespace esd {

/// Okapi BM25 free parameters.
struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    /// Throws InvalidArgument unless k1 > 0 and 0 <= b <= 1.
    void validate() const;

    bool operator==(const Bm25Params&) const = default;
};

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;

    bool operator==(const Posting&) const = default;
};

/// Inverted index over the concatenated text fields of a catalog.
class LexIndex {
public:
    /// Version of the on-disk JSON layout written by save_lexical_index.
    static constexpr int kFormatVersion = 1;

    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    const Bm25Params& params() const { return params_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
    const std::vector<std::string>& fields() const { return fields_; }
    const std::map<std::string, std::vector<Posting>, std::less<>>& postings() const {
        return postings_;
    }

    /// Postings of `term`, sorted by doc position; empty when unseen.
    const std::vector<Posting>& postings_for(std::string_view term) const;
    std::size_t document_frequency(std::string_view term) const {
        return postings_for(term).size();
    }

    /// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)).
    double idf(std::size_t df) const;

    bool operator==(const LexIndex&) const = default;

private:
    friend LexIndex build_lexical_index_from_texts(const std::vector<std::string>&,
                                                   const std::vector<std::string>&,
                                                   const AbbrDict&, const Bm25Params&);
    friend LexIndex load_lexical_index(const std::filesystem::path&);

    void finalize();

    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    std::vector<std::string> fields_;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
};

/// title + summary + variables + keywords, space separated.
std::string indexed_text(const CatalogRecord& record);

/// Each document is indexed_text(record) passed through
/// expand_abbreviations and tokenize. Throws InvalidArgument("nothing to
/// index") for an empty catalog.
LexIndex build_lexical_index(const Catalog& catalog, const AbbrDict& dict,
                             const Bm25Params& params = {});

/// Lower-level entry used by the catalog builder and by tests: one
/// document per (id, text) pair.
LexIndex build_lexical_index_from_texts(const std::vector<std::string>& ids,
                                        const std::vector<std::string>& texts,
                                        const AbbrDict& dict, const Bm25Params& params = {});

/// Sum over distinct query terms of idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl)).
/// Throws InvalidArgument when doc is out of range.
double bm25_score(const LexIndex& index, const TokenStream& query_terms, std::size_t doc);

struct LexicalSearchOptions {
    /// Apply abbreviation expansion to the query as well as the index.
    bool expand_query = false;
};

/// Top-k documents that contain at least one query term, by descending
/// BM25 score, ties by ascending record id.
std::vector<ScoredCandidate> lexical_search(const LexIndex& index, std::string_view query,
                                            const AbbrDict& dict, std::size_t k,
                                            const LexicalSearchOptions& options = {});

void save_lexical_index(const LexIndex& index, const std::filesystem::path& path);
LexIndex load_lexical_index(const std::filesystem::path& path);

}  // namespace esd
