#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "esd/error.hpp"
#include "esd/pipeline.hpp"
#include "oracles.hpp"

using namespace esd;

namespace {

CatalogRecord rec(std::string id, std::string title, std::string summary = {}) {
    CatalogRecord r;
    r.id = std::move(id);
    r.title = std::move(title);
    r.summary = std::move(summary);
    return r;
}

Engine make_engine(std::vector<CatalogRecord> records, AbbrDict dict = {}) {
    Catalog c;
    for (auto& r : records) c.add(std::move(r));
    return Engine(std::move(c), std::move(dict), std::make_shared<HashEmbedder>());
}

ScoredCandidate cand(std::string id, std::optional<std::uint32_t> lex, std::optional<std::uint32_t> sem) {
    ScoredCandidate c;
    c.id = std::move(id);
    c.lexical_rank = lex;
    c.semantic_rank = sem;
    if (lex) c.provenance |= Provenance(Retriever::Lexical);
    if (sem) c.provenance |= Provenance(Retriever::Semantic);
    return c;
}

std::vector<std::string> ids_of(const std::vector<ScoredCandidate>& cs) {
    std::vector<std::string> out;
    for (const auto& c : cs) out.push_back(c.id);
    return out;
}

UnderstoodQuery plain(const std::string& q) {
    UnderstoodQuery u;
    u.original = u.rewritten = q;
    return u;
}

}  // namespace

TEST_CASE("recall merges provenance") {
    auto e = make_engine({rec("a", "rain gauge"), rec("b", "snow depth"), rec("c", "rain radar")});
    auto pool = recall(plain("rain"), e.lexical(), e.vectors(), e.embedder(), e.dict(), {});
    auto it = std::find_if(pool.begin(), pool.end(), [](const auto& c) { return c.id == "a"; });
    REQUIRE(it != pool.end());
    CHECK(it->provenance.has(Retriever::Lexical));
    CHECK(it->provenance.has(Retriever::Semantic));
    CHECK(it->provenance.names() == std::vector<std::string_view>{"LEXICAL", "SEMANTIC"});
    CHECK(pool.size() >= 2);
}

TEST_CASE("lexical-only hits carry only lexical provenance") {
    auto e = make_engine({rec("a", "rain"), rec("b", "snow")});
    auto lex = lexical_search(e.lexical(), "rain", e.dict(), 10);
    for (const auto& c : lex) {
        CHECK(c.provenance.has(Retriever::Lexical));
        CHECK(!c.provenance.has(Retriever::Semantic));
    }
}

TEST_CASE("recall rejects mismatched indexes") {
    auto a = make_engine({rec("a", "rain")});
    auto b = make_engine({rec("b", "rain")});
    CHECK_THROWS_AS(recall(plain("rain"), a.lexical(), b.vectors(), a.embedder(), a.dict(), {}),
                    InvalidArgument);
}

TEST_CASE("constraint filtering") {
    Catalog cat;
    auto old = rec("old", "x");
    old.temporal_start = make_date(1990, 1, 1);
    old.temporal_end = make_date(1999, 12, 31);
    cat.add(old);
    cat.add(rec("undated", "x"));
    auto recent = rec("recent", "x");
    recent.temporal_start = make_date(2015, 1, 1);
    cat.add(recent);

    std::vector<ScoredCandidate> in{cand("old", 1, {}), cand("undated", 2, {}), cand("recent", 3, {})};
    QueryConstraints none;
    CHECK(filter_constraints(in, none, cat, FilterMode::Hard) == in);

    QueryConstraints y2020;
    y2020.temporal = DateRange{make_date(2020, 1, 1), make_date(2020, 12, 31)};
    CHECK(ids_of(filter_constraints(in, y2020, cat, FilterMode::Hard)) ==
          std::vector<std::string>{"undated", "recent"});
    auto soft = filter_constraints(in, y2020, cat, FilterMode::Soft);
    CHECK(ids_of(soft) == std::vector<std::string>{"undated", "recent", "old"});
    CHECK(soft[2].demoted);
}

TEST_CASE("spatial overlap handles the antimeridian") {
    BBox pacific{120, -60, -70, 60};
    CHECK(spatial_overlaps(pacific, BBox{170, 0, 175, 10}));
    CHECK(spatial_overlaps(pacific, BBox{-100, 0, -80, 10}));
    CHECK(!spatial_overlaps(pacific, BBox{0, 0, 10, 10}));
    CHECK(!spatial_overlaps(BBox{0, 0, 10, 10}, BBox{0, 20, 10, 30}));
}

TEST_CASE("reciprocal rank fusion") {
    auto fused = fuse({cand("both", 1, 1), cand("one", {}, 1)}, {});
    CHECK(fused[0].id == "both");
    CHECK(fused[0].score == doctest::Approx(2.0 / 61.0).epsilon(1e-12));
    CHECK(fused[1].score == doctest::Approx(1.0 / 61.0).epsilon(1e-12));
    CHECK(fused[0].score == doctest::Approx(0.03279).epsilon(1e-3));

    auto tie = fuse({cand("b", 1, {}), cand("a", {}, 1)}, {});
    CHECK(ids_of(tie) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("weighted fusion") {
    FusionParams p;
    p.method = FusionMethod::Weighted;
    auto a = cand("a", 1, {});
    a.lexical_score = 4.0;
    auto b = cand("b", 2, 1);
    b.lexical_score = 2.0;
    b.semantic_score = 0.9;
    auto fused = fuse({b, a}, p);
    CHECK(fused[0].id == "a");
    CHECK(fused[0].score == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fused[1].score == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("baseline reranker") {
    Catalog cat;
    cat.add(rec("a", "snow cover", "daily snow"));
    cat.add(rec("b", "rain rate", "precipitation"));
    cat.add(rec("c", "rain", "rain"));
    auto fused = fuse({cand("a", 1, 1), cand("b", 2, 3), cand("c", 3, 2)}, {});

    BaselineReranker only_fused(1, 0, 0);
    CHECK(ids_of(rerank("rain", fused, cat, only_fused, 50).ranked) == ids_of(fused));

    BaselineReranker text_only(0, 0.5, 0.5);
    CHECK(rerank("rain", fused, cat, text_only, 50).ranked[0].id == "c");

    CHECK_THROWS_AS(rerank("rain", fused, cat, only_fused, 0), InvalidArgument);
    CHECK(ids_of(rerank("rain", fused, cat, text_only, 1).ranked) == ids_of(fused));
}

TEST_CASE("LLM reranker promotes what the provider scores highest") {
    Catalog cat;
    for (const char* id : {"a", "b", "c", "d"}) cat.add(rec(id, std::string("title ") + id));
    auto fused = fuse({cand("a", 1, {}), cand("b", 2, {}), cand("c", 3, {}), cand("d", 4, {})}, {});
    StubLlmProvider stub;
    stub.set_fallback(R"([{"id":"a","score":0},{"id":"b","score":0},{"id":"c","score":10}])");
    LlmReranker llm(stub, PromptTemplates::defaults().rerank);
    auto out = rerank("q", fused, cat, llm, 3);
    CHECK(!out.degraded);
    CHECK(ids_of(out.ranked) == std::vector<std::string>{"c", "a", "b", "d"});
}

TEST_CASE("LLM reranker failure degrades to fused order") {
    Catalog cat;
    cat.add(rec("a", "x"));
    cat.add(rec("b", "y"));
    auto fused = fuse({cand("a", 1, {}), cand("b", 2, {})}, {});
    StubLlmProvider junk;
    junk.set_fallback("not json");
    LlmReranker llm(junk, PromptTemplates::defaults().rerank);
    auto out = rerank("q", fused, cat, llm, 2);
    CHECK(out.degraded);
    CHECK(out.warning);
    CHECK(junk.calls() == 2);
    CHECK(out.ranked == fused);

    FailingLlmProvider failing;
    LlmReranker broken(failing, PromptTemplates::defaults().rerank);
    CHECK(rerank("q", fused, cat, broken, 2).degraded);
}

TEST_CASE("parse_rerank_reply") {
    CHECK(parse_rerank_reply(R"([{"id":"a","score":3},{"id":"b","score":7.5}])", {"b", "a"}) ==
          std::vector<double>{7.5, 3});
    CHECK(!parse_rerank_reply(R"([{"id":"a","score":3}])", {"a", "b"}));
    CHECK(!parse_rerank_reply("[{\"id\":\"a\"}]", {"a"}));
}

TEST_CASE("end-to-end search") {
    auto e = make_engine({rec("p", "precipitation rate", "daily precipitation"),
                          rec("q", "aerosol optical depth", "aerosol")});
    SearchConfig cfg;
    BaselineReranker reranker;
    auto resp = search("flood analysis", e, cfg, reranker);
    CHECK(resp.understood.intent == IntentType::TypeB);
    REQUIRE(!resp.results.empty());
    CHECK(resp.results[0].id == "p");

    auto rare = make_engine({rec("r1", "snow snow"), rec("r2", "volcano ash"), rec("r3", "snow rain")});
    CHECK(search("volcano", rare, cfg, reranker).results[0].id == "r2");

    CHECK(search_response_json(search("volcano", rare, cfg, reranker), true) ==
          search_response_json(search("volcano", rare, cfg, reranker), true));
    CHECK_THROWS_AS(search("  ", rare, cfg, reranker), InvalidArgument);
}

TEST_CASE("search with an always-failing provider still answers") {
    auto e = make_engine({rec("p", "precipitation rate"), rec("q", "aerosol optical depth")});
    FailingLlmProvider failing;
    SearchConfig cfg;
    cfg.understanding.intent_mode = StageMode::Provider;
    cfg.understanding.rewrite_mode = StageMode::Provider;
    cfg.understanding.provider = &failing;
    LlmReranker llm(failing, cfg.understanding.prompts.rerank);
    auto resp = search("I want to study flood risk", e, cfg, llm);
    CHECK(resp.rerank_degraded);
    CHECK(!resp.results.empty());
    CHECK(!resp.warnings.empty());
}

TEST_CASE("property: fusion is a permutation, soft filtering a stable partition") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = rng() % 30;
        std::vector<ScoredCandidate> in;
        Catalog cat;
        for (std::size_t i = 0; i < n; ++i) {
            std::optional<std::uint32_t> lex, sem;
            if (rng() % 3) lex = static_cast<std::uint32_t>(1 + rng() % 40);
            if (!lex || rng() % 2) sem = static_cast<std::uint32_t>(1 + rng() % 40);
            in.push_back(cand("id" + std::to_string(i), lex, sem));
            auto r = rec("id" + std::to_string(i), "t");
            if (rng() % 2) {
                int y = 1950 + static_cast<int>(rng() % 70);
                r.temporal_start = make_date(y, 1, 1);
                r.temporal_end = make_date(y + 5, 1, 1);
            }
            cat.add(r);
        }
        std::shuffle(in.begin(), in.end(), rng);

        auto fused = fuse(in, {});
        auto a = ids_of(in), b = ids_of(fused);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);

        QueryConstraints qc;
        qc.temporal = DateRange{make_date(1990, 1, 1), make_date(1995, 12, 31)};
        auto soft = filter_constraints(in, qc, cat, FilterMode::Soft);
        std::vector<std::string> pass, demoted;
        for (const auto& c : in) {
            const auto& r = *cat.find(c.id);
            (temporal_overlaps(r, *qc.temporal) ? pass : demoted).push_back(c.id);
        }
        auto expect = pass;
        expect.insert(expect.end(), demoted.begin(), demoted.end());
        CHECK(ids_of(soft) == expect);

        BaselineReranker alpha_only(0.7, 0, 0);
        CHECK(ids_of(rerank("q", fused, cat, alpha_only, n + 1).ranked) == ids_of(fused));
    }
}

TEST_CASE("property: fused pool covers each single path") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = oracle::random_corpus(rng, 150, 30);
        std::vector<CatalogRecord> recs;
        for (std::size_t i = 0; i < c.ids.size(); ++i) recs.push_back(rec(c.ids[i], c.texts[i]));
        auto e = make_engine(recs);
        FusionParams p;
        p.pool_size = 20;
        for (int q = 0; q < 5; ++q) {
            const auto query = oracle::random_text(rng, 30, 3);
            auto pool = recall(plain(query), e.lexical(), e.vectors(), e.embedder(), e.dict(), p);
            std::set<std::string> ids;
            for (const auto& x : pool) ids.insert(x.id);
            CHECK(ids.size() == pool.size());
            for (const auto& x : lexical_search(e.lexical(), query, e.dict(), p.pool_size)) CHECK(ids.count(x.id));
            for (const auto& x : vector_search(e.vectors(), e.embedder(), query, p.pool_size)) CHECK(ids.count(x.id));
        }
    }
}
