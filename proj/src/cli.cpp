#include "esd/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "esd/config.hpp"
#include "esd/error.hpp"
#include "esd/evalbench.hpp"
#include "esd/textproc.hpp"
#include "util.hpp"

namespace esd {

namespace {

// Engine flags shared by search and eval. Only flags given on the command
// line are applied, so they override config-file values field by field.
struct EngineFlags {
    std::string catalog, abbr_dict, variable_map, lexical_index, stub_table;
    std::string filter, fusion, intent_mode, rewrite_mode, reranker, provider, embedder;
    std::size_t top_m = 0, threads = 0;
    bool expand = false;
    std::vector<CLI::Option*> opts;

    void add_to(CLI::App& app) {
        auto opt = [&](const char* name, auto& var, const char* help) {
            opts.push_back(app.add_option(name, var, help));
        };
        opt("--catalog", catalog, "Catalog JSON Lines file");
        opt("--abbr-dict", abbr_dict, "Abbreviation dictionary (JSON)");
        opt("--variable-map", variable_map, "Variable alias map (JSON)");
        opt("--lexical-index", lexical_index, "Prebuilt lexical index");
        opt("--filter", filter, "Constraint filter: soft|hard");
        opt("--fusion", fusion, "Fusion method: rrf|weighted");
        opt("--top-m", top_m, "Candidates passed to the reranker");
        opt("--threads", threads, "Worker threads");
        opt("--intent-mode", intent_mode, "rules|provider");
        opt("--rewrite-mode", rewrite_mode, "rules|provider");
        opt("--reranker", reranker, "baseline|llm");
        opt("--provider", provider, "none|stub|remote");
        opt("--stub-table", stub_table, "Stub provider reply table (JSON)");
        opt("--embedder", embedder, "hash|remote");
        opts.push_back(app.add_flag("--expand-queries", expand, "Expand abbreviations in queries"));
    }

    bool given(std::size_t i) const { return opts[i]->count() > 0; }

    void apply(EngineConfig& c) const {
        if (given(0)) c.catalog = catalog;
        if (given(1)) c.abbr_dict = abbr_dict;
        if (given(2)) c.variable_map = variable_map;
        if (given(3)) c.lexical_index = lexical_index;
        if (given(4)) c.filter = required(parse_filter_mode(filter), "--filter");
        if (given(5)) c.fusion.method = required(parse_fusion_method(fusion), "--fusion");
        if (given(6)) c.top_m = top_m;
        if (given(7)) c.threads = threads;
        if (given(8)) c.intent_mode = required(parse_stage_mode(intent_mode), "--intent-mode");
        if (given(9)) c.rewrite_mode = required(parse_stage_mode(rewrite_mode), "--rewrite-mode");
        if (given(10)) c.reranker = reranker;
        if (given(11)) c.provider = provider;
        if (given(12)) c.stub_table = stub_table;
        if (given(13)) c.embedder = embedder;
        if (given(14)) c.expand_queries = expand;
    }

    template <typename T>
    static T required(std::optional<T> v, const char* flag) {
        if (!v) throw InvalidArgument(std::string("invalid value for ") + flag);
        return *v;
    }
};

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << text;
    if (!f) throw IoError("error writing " + path);
}

nlohmann::json catalog_summary(const Catalog& catalog) {
    std::map<std::string, std::size_t> by_source;
    std::size_t with_time = 0, with_bbox = 0;
    for (const auto& r : catalog.records()) {
        ++by_source[std::string(to_string(r.source))];
        if (r.temporal_start || r.temporal_end) ++with_time;
        if (r.bbox) ++with_bbox;
    }
    return {{"records", catalog.size()},
            {"by_source", by_source},
            {"with_temporal", with_time},
            {"with_bbox", with_bbox}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
            std::ostream& err) {
    CLI::App app{"Hybrid dataset search over Earth-science metadata catalogs", "esdsearch"};
    app.require_subcommand(1);
    app.set_version_flag("--version",
                         "esdsearch " + std::string(kVersion) + " (lexical index format " +
                             std::to_string(LexIndex::kFormatVersion) + ")");
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate a catalog dump and print a summary");
    std::string ingest_in, ingest_out, ingest_vmap;
    bool normalize = false;
    ingest->add_option("catalog", ingest_in, "Catalog JSON Lines file")->required();
    auto* normalize_opt = ingest->add_flag("--normalize,!--no-normalize", normalize,
                                           "Map variable aliases to canonical names");
    auto* ingest_vmap_opt = ingest->add_option("--variable-map", ingest_vmap, "Variable alias map");
    ingest->add_option("--out", ingest_out, "Write the (normalized) catalog here");

    // index build
    auto* index = app.add_subcommand("index", "Lexical index operations");
    index->require_subcommand(1);
    auto* index_build = index->add_subcommand("build", "Build and save the lexical index");
    std::string index_catalog, index_out, index_abbr;
    double k1 = 0, b = 0;
    auto* index_catalog_opt = index_build->add_option("--catalog", index_catalog, "Catalog file");
    index_build->add_option("--out", index_out, "Output index file")->required();
    auto* index_abbr_opt = index_build->add_option("--abbr-dict", index_abbr, "Abbreviation dictionary");
    auto* k1_opt = index_build->add_option("--k1", k1, "BM25 k1");
    auto* b_opt = index_build->add_option("--b", b, "BM25 b");

    // search
    auto* search = app.add_subcommand("search", "Run one query through the full pipeline");
    std::string query;
    bool explain = false;
    std::size_t search_k = 0;
    EngineFlags search_flags;
    search->add_option("query", query, "Query text")->required();
    search->add_flag("--explain", explain, "Include the understood query and stage counts");
    auto* search_k_opt = search->add_option("--k", search_k, "Number of results");
    search_flags.add_to(*search);

    // eval run
    auto* eval = app.add_subcommand("eval", "Benchmark evaluation");
    eval->require_subcommand(1);
    auto* eval_run = eval->add_subcommand("run", "Evaluate the engine on a benchmark file");
    std::string bench_path, format = "json", table_out;
    std::vector<std::size_t> ks{10, 20, 50, 100};
    std::size_t depth = 0;
    EngineFlags eval_flags;
    eval_run->add_option("--bench", bench_path, "Benchmark JSON Lines file")->required();
    eval_run->add_option("--k", ks, "Recall cutoffs, comma separated")->delimiter(',');
    auto* depth_opt = eval_run->add_option("--depth", depth, "Ranked list depth per query");
    eval_run->add_option("--format", format, "json|table")->check(CLI::IsMember({"json", "table"}));
    eval_run->add_option("--table-out", table_out, "Also write the text table here");
    eval_flags.add_to(*eval_run);

    // bench match
    auto* bench = app.add_subcommand("bench", "Benchmark construction");
    bench->require_subcommand(1);
    auto* bench_match = bench->add_subcommand("match", "Turn paper extractions into benchmark cases");
    std::string bench_catalog, url_patterns, bench_out;
    std::vector<std::string> extractions;
    double threshold = 0;
    auto* bench_catalog_opt = bench_match->add_option("--catalog", bench_catalog, "Catalog file");
    bench_match->add_option("--extraction", extractions, "Extraction JSON files")->required();
    auto* url_opt = bench_match->add_option("--url-patterns", url_patterns, "URL pattern table");
    auto* threshold_opt = bench_match->add_option("--threshold", threshold, "Fuzzy threshold");
    bench_match->add_option("--out", bench_out, "Output benchmark file");

    // abbr expand
    auto* abbr = app.add_subcommand("abbr", "Abbreviation tools");
    abbr->require_subcommand(1);
    auto* abbr_expand = abbr->add_subcommand("expand", "Expand abbreviations from stdin");
    std::string abbr_dict;
    auto* abbr_dict_opt = abbr_expand->add_option("--abbr-dict", abbr_dict, "Abbreviation dictionary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        if (dynamic_cast<const CLI::ExtrasError*>(&e) || dynamic_cast<const CLI::RequiredError*>(&e))
            err << app.help();
        return 1;
    }

    try {
        EngineConfig config;
        if (!config_path.empty()) config.merge_file(config_path);

        if (*ingest) {
            if (normalize_opt->count()) config.normalize_variables = normalize;
            if (ingest_vmap_opt->count()) config.variable_map = ingest_vmap;
            config.catalog = ingest_in;
            auto catalog = load_catalog(config);
            auto summary = catalog_summary(catalog);
            summary["normalized"] = config.normalize_variables;
            if (!ingest_out.empty()) {
                std::ofstream f(ingest_out, std::ios::binary);
                if (!f) throw IoError("cannot write " + ingest_out);
                write_records(catalog, f);
            }
            out << summary.dump(2) << "\n";
        } else if (*index_build) {
            if (index_catalog_opt->count()) config.catalog = index_catalog;
            if (index_abbr_opt->count()) config.abbr_dict = index_abbr;
            if (k1_opt->count()) config.bm25.k1 = k1;
            if (b_opt->count()) config.bm25.b = b;
            config.bm25.validate();
            auto catalog = load_catalog(config);
            auto lex = build_lexical_index(catalog, load_abbr_dict(config), config.bm25);
            save_lexical_index(lex, index_out);
            nlohmann::json summary = {{"documents", lex.doc_count()},
                                      {"terms", lex.postings().size()},
                                      {"avg_doc_length", lex.avg_doc_length()},
                                      {"format_version", LexIndex::kFormatVersion},
                                      {"out", index_out}};
            out << summary.dump(2) << "\n";
        } else if (*search) {
            search_flags.apply(config);
            if (search_k_opt->count()) config.result_k = search_k;
            Runtime runtime(config);
            auto resp = runtime.search(query);
            for (const auto& w : resp.warnings) err << "warning: " << w << "\n";
            out << search_response_json(resp, explain, 2) << "\n";
        } else if (*eval_run) {
            eval_flags.apply(config);
            if (ks.empty()) throw InvalidArgument("--k needs at least one cutoff");
            const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
            if (!depth_opt->count()) depth = std::max(max_k, config.result_k);
            config.result_k = std::max(config.result_k, depth);
            auto cases = load_benchmark(bench_path);
            Runtime runtime(config);
            auto report = evaluate(
                cases,
                [&runtime](const std::string& q, std::size_t d) { return runtime.ranked_ids(q, d); },
                ks, depth, config.threads);
            for (const auto& c : report.cases)
                if (c.failed) err << "case " << c.case_index << " failed: " << c.error << "\n";
            if (!table_out.empty()) write_text_file(table_out, report_table(report));
            out << (format == "table" ? report_table(report) : report_json(report) + "\n");
        } else if (*bench_match) {
            if (bench_catalog_opt->count()) config.catalog = bench_catalog;
            if (url_opt->count()) config.url_patterns = url_patterns;
            if (threshold_opt->count()) config.fuzzy_threshold = threshold;
            config.validate();
            auto catalog = load_catalog(config);
            auto patterns = config.url_patterns.empty() ? default_url_patterns()
                                                        : load_url_patterns(config.url_patterns);
            FuzzyMatchOptions opts;
            opts.threshold = config.fuzzy_threshold;
            std::vector<BenchmarkCase> cases;
            for (const auto& file : extractions) {
                ExtractionRecord rec;
                try {
                    rec = parse_extraction(detail::read_file(file));
                } catch (const DataError& e) {
                    throw DataError(file + ": " + e.what());
                }
                auto stem = std::filesystem::path(file).stem().string();
                auto got = match_groundtruth(rec, catalog, patterns, opts, stem);
                if (got.empty()) err << "warning: " << file << ": no dataset matched the catalog\n";
                std::move(got.begin(), got.end(), std::back_inserter(cases));
            }
            if (bench_out.empty()) {
                write_benchmark(cases, out);
            } else {
                std::ofstream f(bench_out, std::ios::binary);
                if (!f) throw IoError("cannot write " + bench_out);
                write_benchmark(cases, f);
            }
        } else if (*abbr_expand) {
            if (abbr_dict_opt->count()) config.abbr_dict = abbr_dict;
            auto dict = load_abbr_dict(config);
            std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
            out << expand_abbreviations(text, dict);
        }
        return 0;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace esd
