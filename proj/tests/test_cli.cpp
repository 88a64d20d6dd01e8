#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "esd/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args, const std::string& input = {}) {
    args.insert(args.begin(), "esdsearch");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = esd::run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
    return {code, out.str(), err.str()};
}

const std::string kFixtures = ESD_FIXTURES_DIR;
const std::string kCatalog = kFixtures + "/catalog.jsonl";
const std::string kBench = kFixtures + "/bench.jsonl";

fs::path scratch() {
    auto dir = fs::temp_directory_path() / "esd_cli_test";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    auto none = run({});
    CHECK(none.code == 1);
    CHECK(none.err.find("Usage") != std::string::npos);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"search"}).code == 1);
    CHECK(run({"eval", "run", "--bench", kBench, "--catalog", kCatalog, "--filter", "medium"}).code == 1);
}

TEST_CASE("version") {
    auto r = run({"--version"});
    CHECK(r.code == 0);
    CHECK(r.out.find("0.1.0") != std::string::npos);
    CHECK(r.out.find("index format 1") != std::string::npos);
}

TEST_CASE("data errors exit 2") {
    CHECK(run({"search", "rain", "--catalog", "/nonexistent/catalog.jsonl"}).code == 2);
    auto dir = scratch();
    std::ofstream(dir / "dup.jsonl") << "{\"id\":\"A\"}\n{\"id\":\"A\"}\n";
    auto r = run({"ingest", (dir / "dup.jsonl").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("lines 1 and 2") != std::string::npos);
}

TEST_CASE("ingest summarises and normalizes") {
    auto out = (scratch() / "normalized.jsonl").string();
    auto r = run({"ingest", kCatalog, "--out", out});
    REQUIRE(r.code == 0);
    auto summary = nlohmann::json::parse(r.out);
    CHECK(summary["records"].get<int>() > 30);
    CHECK(summary["normalized"] == true);
    std::ifstream f(out);
    std::string all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(all.find("\"precipRate\"") == std::string::npos);
    CHECK(run({"ingest", kCatalog, "--no-normalize"}).out.find("\"normalized\": false") != std::string::npos);
}

TEST_CASE("search with explain") {
    auto r = run({"search", "ERA5 temperature 2020", "--explain", "--catalog", kCatalog});
    REQUIRE(r.code == 0);
    auto doc = nlohmann::json::parse(r.out);
    REQUIRE(doc["results"].is_array());
    CHECK(!doc["results"].empty());
    for (const auto& item : doc["results"])
        for (const char* key : {"id", "score", "rank", "provenance", "demoted"}) CHECK(item.contains(key));
    CHECK(doc["explain"]["understood_query"]["intent"] == "TYPE_A");
    CHECK(doc["explain"]["stage_counts"].is_object());

    auto plain = run({"search", "ERA5 temperature 2020", "--catalog", kCatalog, "--k", "3"});
    CHECK(nlohmann::json::parse(plain.out).size() == 3);
}

TEST_CASE("eval run reports the four cutoffs") {
    auto r = run({"eval", "run", "--bench", kBench, "--k", "10,20,50,100", "--catalog", kCatalog});
    REQUIRE(r.code == 0);
    auto doc = nlohmann::json::parse(r.out);
    for (const char* k : {"10", "20", "50", "100"}) CHECK(doc["overall"]["recall"].contains(k));
    auto table = run({"eval", "run", "--bench", kBench, "--catalog", kCatalog, "--format", "table"});
    CHECK(table.out.find("R@100") != std::string::npos);
}

TEST_CASE("index build then search from the saved index") {
    auto idx = (scratch() / "lex.json").string();
    auto b = run({"index", "build", "--catalog", kCatalog, "--out", idx});
    REQUIRE(b.code == 0);
    CHECK(nlohmann::json::parse(b.out)["format_version"] == 1);
    auto with_index = run({"search", "soil moisture", "--catalog", kCatalog, "--lexical-index", idx});
    auto without = run({"search", "soil moisture", "--catalog", kCatalog});
    CHECK(with_index.code == 0);
    CHECK(with_index.out == without.out);
}

TEST_CASE("bench match builds cases from extraction files") {
    auto r = run({"bench", "match", "--catalog", kCatalog, "--extraction",
                  kFixtures + "/extractions/florida_flooding.json", kFixtures + "/extractions/unmatched.json"});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) ++n;
    CHECK(n == 3);
    CHECK(r.err.find("unmatched.json") != std::string::npos);
}

TEST_CASE("abbr expand filters stdin") {
    auto r = run({"abbr", "expand"}, "MODIS snow cover\n");
    CHECK(r.code == 0);
    CHECK(r.out == "MODIS (Moderate Resolution Imaging Spectroradiometer) snow cover\n");
}

TEST_CASE("flag beats config beats default") {
    auto dir = scratch();
    std::ofstream(dir / "cfg.json") << R"({"catalog": ")" << kCatalog << R"(", "result_k": 4})";
    const auto cfg = (dir / "cfg.json").string();
    auto from_config = run({"--config", cfg, "search", "rain"});
    REQUIRE(from_config.code == 0);
    CHECK(nlohmann::json::parse(from_config.out).size() == 4);
    auto from_flag = run({"--config", cfg, "search", "rain", "--k", "2"});
    CHECK(nlohmann::json::parse(from_flag.out).size() == 2);
    auto from_default = run({"search", "rain", "--catalog", kCatalog});
    CHECK(nlohmann::json::parse(from_default.out).size() > 4);

    std::ofstream(dir / "bad.json") << R"({"catalgo": "x"})";
    CHECK(run({"--config", (dir / "bad.json").string(), "search", "rain"}).code == 2);
}

TEST_CASE("invocations are reentrant") {
    const std::vector<std::string> args{"search", "I want to study Florida flooding", "--explain", "--catalog", kCatalog};
    CHECK(run(args).out == run(args).out);
}

TEST_CASE("the installed binary wires up the same entry point") {
    const std::string cmd = std::string(ESD_CLI_PATH) + " --version > " + (scratch() / "v.txt").string();
    CHECK(std::system(cmd.c_str()) == 0);
    std::ifstream f(scratch() / "v.txt");
    std::string line;
    std::getline(f, line);
    CHECK(line.rfind("esdsearch 0.1.0", 0) == 0);
}
