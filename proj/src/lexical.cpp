#include "esd/lexical.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "esd/error.hpp"
#include "util.hpp"

namespace esd {

using nlohmann::json;

void Bm25Params::validate() const {
    if (!(k1 > 0.0)) throw InvalidArgument("bm25 k1 must be > 0");
    if (!(b >= 0.0 && b <= 1.0)) throw InvalidArgument("bm25 b must lie in [0, 1]");
}

const std::vector<Posting>& LexIndex::postings_for(std::string_view term) const {
    static const std::vector<Posting> kEmpty;
    auto it = postings_.find(term);
    return it == postings_.end() ? kEmpty : it->second;
}

double LexIndex::idf(std::size_t df) const {
    const double n = static_cast<double>(doc_count());
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

void LexIndex::finalize() {
    const double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
    avg_doc_length_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
}

std::string indexed_text(const CatalogRecord& r) {
    std::string text = r.title;
    text += ' ';
    text += r.summary;
    text += ' ';
    text += detail::join(r.variables, " ");
    text += ' ';
    text += detail::join(r.keywords, " ");
    return text;
}

LexIndex build_lexical_index_from_texts(const std::vector<std::string>& ids,
                                        const std::vector<std::string>& texts,
                                        const AbbrDict& dict, const Bm25Params& params) {
    params.validate();
    if (ids.empty()) throw InvalidArgument("nothing to index");
    if (ids.size() != texts.size()) throw InvalidArgument("ids and texts differ in length");

    LexIndex index;
    index.params_ = params;
    index.doc_ids_ = ids;
    index.fields_ = {"title", "summary", "variables", "keywords"};
    index.doc_lengths_.reserve(texts.size());

    for (std::size_t doc = 0; doc < texts.size(); ++doc) {
        const auto tokens = tokenize(expand_abbreviations(texts[doc], dict));
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        std::map<std::string_view, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) {
            auto it = index.postings_.find(term);
            if (it == index.postings_.end())
                it = index.postings_.emplace(std::string(term), std::vector<Posting>{}).first;
            it->second.push_back({static_cast<std::uint32_t>(doc), count});
        }
    }
    index.finalize();
    return index;
}

LexIndex build_lexical_index(const Catalog& catalog, const AbbrDict& dict,
                             const Bm25Params& params) {
    if (catalog.empty()) throw InvalidArgument("nothing to index");
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    ids.reserve(catalog.size());
    texts.reserve(catalog.size());
    for (const auto& r : catalog.records()) {
        ids.push_back(r.id);
        texts.push_back(indexed_text(r));
    }
    return build_lexical_index_from_texts(ids, texts, dict, params);
}

namespace {

std::vector<std::string> unique_terms(const TokenStream& terms) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& t : terms)
        if (seen.insert(t).second) out.push_back(t);
    return out;
}

double term_weight(const LexIndex& index, double idf, std::uint32_t tf, std::uint32_t doc_len) {
    const auto& p = index.params();
    const double f = tf;
    const double norm = 1.0 - p.b + p.b * (static_cast<double>(doc_len) / index.avg_doc_length());
    return idf * f * (p.k1 + 1.0) / (f + p.k1 * norm);
}

}  // namespace

double bm25_score(const LexIndex& index, const TokenStream& query_terms, std::size_t doc) {
    if (doc >= index.doc_count()) throw InvalidArgument("document position out of range");
    double score = 0.0;
    for (const auto& term : unique_terms(query_terms)) {
        const auto& postings = index.postings_for(term);
        auto it = std::lower_bound(postings.begin(), postings.end(), doc,
                                   [](const Posting& p, std::size_t d) { return p.doc < d; });
        if (it == postings.end() || it->doc != doc) continue;
        score += term_weight(index, index.idf(postings.size()), it->tf, index.doc_lengths()[doc]);
    }
    return score;
}

std::vector<ScoredCandidate> lexical_search(const LexIndex& index, std::string_view query,
                                            const AbbrDict& dict, std::size_t k,
                                            const LexicalSearchOptions& options) {
    if (k == 0) throw InvalidArgument("k must be >= 1");
    const auto terms = options.expand_query ? tokenize(expand_abbreviations(query, dict))
                                            : tokenize(query);

    // Term-at-a-time accumulation in first-appearance order of the distinct
    // query terms, the same summation order bm25_score uses.
    std::unordered_map<std::uint32_t, double> acc;
    for (const auto& term : unique_terms(terms)) {
        const auto& postings = index.postings_for(term);
        if (postings.empty()) continue;
        const double idf = index.idf(postings.size());
        for (const auto& p : postings)
            acc[p.doc] += term_weight(index, idf, p.tf, index.doc_lengths()[p.doc]);
    }

    std::vector<ScoredCandidate> hits;
    hits.reserve(acc.size());
    for (const auto& [doc, score] : acc) {
        ScoredCandidate c;
        c.id = index.doc_ids()[doc];
        c.score = score;
        c.lexical_score = score;
        c.provenance = Provenance(Retriever::Lexical);
        hits.push_back(std::move(c));
    }
    const auto keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      ranks_before);
    hits.resize(keep);
    for (std::size_t i = 0; i < hits.size(); ++i)
        hits[i].lexical_rank = static_cast<std::uint32_t>(i + 1);
    return hits;
}

// ---------------------------------------------------------------------------
// Persistence

void save_lexical_index(const LexIndex& index, const std::filesystem::path& path) {
    json doc;
    doc["format"] = "esd-lexical-index";
    doc["format_version"] = LexIndex::kFormatVersion;
    doc["params"] = {{"k1", index.params().k1}, {"b", index.params().b}};
    doc["fields"] = index.fields();
    doc["doc_ids"] = index.doc_ids();
    doc["doc_lengths"] = index.doc_lengths();
    json postings = json::object();
    for (const auto& [term, list] : index.postings()) {
        json arr = json::array();
        for (const auto& p : list) arr.push_back({p.doc, p.tf});
        postings[term] = std::move(arr);
    }
    doc["postings"] = std::move(postings);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump() << '\n';
    if (!out) throw IoError("error writing " + path.string());
}

LexIndex load_lexical_index(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(detail::read_file(path));
    } catch (const json::parse_error& e) {
        throw DataError("lexical index " + path.string() + ": malformed JSON: " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "esd-lexical-index")
            throw DataError("not a lexical index file");
        const int version = doc.at("format_version").get<int>();
        if (version != LexIndex::kFormatVersion)
            throw DataError("unsupported lexical index format_version " + std::to_string(version));

        LexIndex index;
        index.params_.k1 = doc.at("params").at("k1").get<double>();
        index.params_.b = doc.at("params").at("b").get<double>();
        index.params_.validate();
        index.fields_ = doc.at("fields").get<std::vector<std::string>>();
        index.doc_ids_ = doc.at("doc_ids").get<std::vector<std::string>>();
        index.doc_lengths_ = doc.at("doc_lengths").get<std::vector<std::uint32_t>>();
        if (index.doc_ids_.size() != index.doc_lengths_.size())
            throw DataError("doc_ids and doc_lengths differ in length");
        for (const auto& [term, arr] : doc.at("postings").items()) {
            std::vector<Posting> list;
            for (const auto& pair : arr) {
                Posting p{pair.at(0).get<std::uint32_t>(), pair.at(1).get<std::uint32_t>()};
                if (p.doc >= index.doc_ids_.size() || p.tf == 0)
                    throw DataError("invalid posting for term '" + term + "'");
                if (!list.empty() && list.back().doc >= p.doc)
                    throw DataError("postings for term '" + term + "' are not sorted");
                list.push_back(p);
            }
            index.postings_.emplace(term, std::move(list));
        }
        index.finalize();
        return index;
    } catch (const json::exception& e) {
        throw DataError("lexical index " + path.string() + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw DataError("lexical index " + path.string() + ": " + e.what());
    }
}

}  // namespace esd
