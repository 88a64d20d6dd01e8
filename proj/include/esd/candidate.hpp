#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace esd {

enum class Retriever : std::uint8_t { Lexical = 1, Semantic = 2 };

/// Set of retrieval paths that surfaced a candidate.
class Provenance {
public:
    constexpr Provenance() = default;
    constexpr explicit Provenance(Retriever r) : bits_(static_cast<std::uint8_t>(r)) {}

    constexpr bool has(Retriever r) const { return bits_ & static_cast<std::uint8_t>(r); }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr Provenance& operator|=(Provenance other) {
        bits_ |= other.bits_;
        return *this;
    }
    constexpr bool operator==(const Provenance&) const = default;

    /// "LEXICAL", "SEMANTIC" in that order.
    std::vector<std::string_view> names() const;

private:
    std::uint8_t bits_ = 0;
};

/// A (dataset, score) pair in a ranked list, with the evidence that put it
/// there. Per-source ranks are 1-based.
struct ScoredCandidate {
    std::string id;
    double score = 0.0;
    Provenance provenance;
    std::optional<std::uint32_t> lexical_rank;
    std::optional<std::uint32_t> semantic_rank;
    std::optional<double> lexical_score;
    std::optional<double> semantic_score;
    bool demoted = false;

    bool operator==(const ScoredCandidate&) const = default;
};

/// Sort order used by every ranked output: score descending, then id
/// ascending.
inline bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

}  // namespace esd
