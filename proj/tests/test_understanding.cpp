#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <random>

#include "esd/error.hpp"
#include "esd/understanding.hpp"

using namespace esd;

namespace {

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

std::string flip_case(std::string s, std::mt19937_64& rng) {
    for (char& c : s)
        if (rng() % 2) c = static_cast<char>(std::isupper(static_cast<unsigned char>(c)) ? std::tolower(c) : std::toupper(c));
    return s;
}

}  // namespace

TEST_CASE("rule-based intent on the labeled examples") {
    const auto g = Gazetteer::defaults();
    CHECK(classify_intent("percipitation data GPM", StageMode::Rules, nullptr, g) == IntentType::TypeA);
    CHECK(classify_intent("I want to study Florida flooding", StageMode::Rules, nullptr, g) == IntentType::TypeB);
    CHECK(classify_intent("ERA5 temperature 2020", StageMode::Rules, nullptr, g) == IntentType::TypeA);
    CHECK(classify_intent("how to predict drought in Africa", StageMode::Rules, nullptr, g) == IntentType::TypeB);
}

TEST_CASE("provider intent and its fallbacks") {
    const auto g = Gazetteer::defaults();
    const auto prompts = PromptTemplates::defaults();
    StubLlmProvider stub;
    stub.set_reply(fill_template(prompts.intent, {{"query", "ERA5 temperature 2020"}}), "B\n");
    CHECK(classify_intent("ERA5 temperature 2020", StageMode::Provider, &stub, g) == IntentType::TypeB);

    std::vector<std::string> warnings;
    stub.set_fallback("maybe");
    CHECK(classify_intent("ERA5 temperature 2020 x", StageMode::Provider, &stub, g, prompts, &warnings) ==
          IntentType::TypeA);
    CHECK(warnings.size() == 1);

    FailingLlmProvider failing;
    warnings.clear();
    CHECK(classify_intent("I want to study Florida flooding", StageMode::Provider, &failing, g, prompts,
                          &warnings) == IntentType::TypeB);
    CHECK(warnings.size() == 1);
}

TEST_CASE("rule-based rewrite") {
    const auto topics = TopicMap::defaults();
    auto r = rewrite_query("flood analysis", StageMode::Rules, nullptr, topics);
    CHECK(contains(r.rewritten, "precipitation"));
    CHECK(contains(r.rewritten, "storm surge"));
    CHECK(rewrite_query("aerosol optical depth", StageMode::Rules, nullptr, topics).rewritten ==
          "aerosol optical depth");
}

TEST_CASE("provider rewrite") {
    const auto topics = TopicMap::defaults();
    const auto prompts = PromptTemplates::defaults();
    const std::string reply =
        R"({"reasoning":"Flooding research needs rainfall and coastal water data.","query":"precipitation extreme rainfall storm surge sea level Florida Gulf of Mexico"})";
    StubLlmProvider stub;
    stub.set_reply(fill_template(prompts.rewrite, {{"query", "I want to study Florida flooding"}}), reply);
    auto r = rewrite_query("I want to study Florida flooding", StageMode::Provider, &stub, topics);
    CHECK(r.rewritten == "precipitation extreme rainfall storm surge sea level Florida Gulf of Mexico");

    StubLlmProvider junk;
    junk.set_fallback("no json here");
    std::vector<std::string> warnings;
    auto fb = rewrite_query("flood analysis", StageMode::Provider, &junk, topics, prompts, &warnings);
    CHECK(junk.calls() == 2);
    CHECK(contains(fb.rewritten, "precipitation"));
    CHECK(!warnings.empty());
}

TEST_CASE("parse_rewrite_reply") {
    CHECK(parse_rewrite_reply("```json\n{\"query\": \"a b\"}\n```")->rewritten == "a b");
    CHECK(!parse_rewrite_reply("{\"query\": \"\"}"));
    CHECK(!parse_rewrite_reply("{\"query\": 3}"));
    CHECK(!parse_rewrite_reply("nothing"));
}

TEST_CASE("constraint extraction") {
    const auto regions = RegionGazetteer::defaults();
    auto c = extract_constraints("Landsat data 1984--2014", regions);
    REQUIRE(c.temporal);
    CHECK(format_date(c.temporal->start) == "1984-01-01");
    CHECK(format_date(c.temporal->end) == "2014-12-31");
    CHECK(!c.spatial);

    CHECK(extract_constraints("soil moisture", regions).empty());

    c = extract_constraints("flooding in Florida 2020", regions);
    REQUIRE(c.temporal);
    CHECK(format_date(c.temporal->start) == "2020-01-01");
    CHECK(format_date(c.temporal->end) == "2020-12-31");
    REQUIRE(c.spatial);
    CHECK(*c.spatial == BBox{-87.7, 24.4, -79.9, 31.0});

    c = extract_constraints("rain 2015 to 2010", regions);
    CHECK(format_date(c.temporal->start) == "2010-01-01");
    CHECK(format_date(c.temporal->end) == "2015-12-31");

    CHECK(!extract_constraints("version 1850 or 21000", regions).temporal);
    CHECK(extract_constraints("Lower Mekong River basin", regions).spatial ==
          BBox{99.0, 8.5, 109.0, 23.0});
}

TEST_CASE("spell correction") {
    const auto g = Gazetteer::defaults();
    CHECK(spell_correct("percipitation data GPM", g.vocabulary()) == "precipitation data GPM");
    CHECK(spell_correct("precipitation", g.vocabulary()) == "precipitation");
    CHECK(spell_correct("data", g.vocabulary()) == "data");
}

TEST_CASE("understand composes the stages") {
    UnderstandingConfig cfg;
    auto a = understand("ERA5 temperature 2020", cfg);
    CHECK(a.intent == IntentType::TypeA);
    CHECK(a.rewritten == "ERA5 temperature 2020");
    REQUIRE(a.constraints.temporal);
    CHECK(format_date(a.constraints.temporal->start) == "2020-01-01");

    auto b = understand("I want to study Florida flooding", cfg);
    CHECK(b.intent == IntentType::TypeB);
    CHECK(contains(b.rewritten, "precipitation"));
    CHECK(b.constraints.spatial);

    CHECK(understand("percipitation data GPM", cfg).rewritten == "precipitation data GPM");

    try {
        understand(" ", cfg);
        FAIL("expected an error");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()) == "empty query");
    }
}

TEST_CASE("property: rules are case-insensitive, rewrites nonempty, constraints ordered") {
    std::mt19937_64 rng(17);
    const auto g = Gazetteer::defaults();
    const auto regions = RegionGazetteer::defaults();
    UnderstandingConfig cfg;
    const std::vector<std::string> queries = {
        "percipitation data GPM", "I want to study Florida flooding", "ERA5 temperature 2020",
        "how to predict drought in Africa", "MODIS NDVI 2001-2005 Amazon", "wildfire smoke 2019 to 2017",
        "sea ice", "x", "heat waves in Europe 1990--2000 and 2010"};
    for (int i = 0; i < 300; ++i) {
        const auto& q = queries[rng() % queries.size()];
        const auto flipped = flip_case(q, rng);
        CHECK(classify_intent(q, StageMode::Rules, nullptr, g) ==
              classify_intent(flipped, StageMode::Rules, nullptr, g));
        auto u = understand(flipped, cfg);
        CHECK(!u.rewritten.empty());
        if (u.constraints.temporal) CHECK(u.constraints.temporal->start <= u.constraints.temporal->end);
        CHECK(understand(flipped, cfg) == u);
    }
}

TEST_CASE("stage 0 with a stub provider is reproducible") {
    StubLlmProvider stub;
    stub.set_fallback(R"({"reasoning":"r","query":"precipitation storm surge"})");
    UnderstandingConfig cfg;
    cfg.intent_mode = StageMode::Provider;
    cfg.rewrite_mode = StageMode::Provider;
    cfg.provider = &stub;
    auto a = understand("I want to study Florida flooding", cfg);
    auto b = understand("I want to study Florida flooding", cfg);
    CHECK(a == b);
}
