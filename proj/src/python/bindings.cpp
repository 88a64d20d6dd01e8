#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "esd/config.hpp"
#include "esd/error.hpp"
#include "esd/evalbench.hpp"
#include "esd/textproc.hpp"
#include "esd/understanding.hpp"

namespace py = pybind11;
using namespace esd;

namespace {

py::dict understood_to_dict(const UnderstoodQuery& u) {
    py::dict d;
    d["original"] = u.original;
    d["intent"] = std::string(to_string(u.intent));
    d["rewritten"] = u.rewritten;
    d["rewrite_reasoning"] = u.rewrite_reasoning ? py::object(py::str(*u.rewrite_reasoning)) : py::none();
    if (u.constraints.temporal)
        d["temporal"] = py::make_tuple(format_date(u.constraints.temporal->start),
                                       format_date(u.constraints.temporal->end));
    else
        d["temporal"] = py::none();
    if (const auto& b = u.constraints.spatial)
        d["spatial"] = py::make_tuple(b->west, b->south, b->east, b->north);
    else
        d["spatial"] = py::none();
    d["warnings"] = u.warnings;
    return d;
}

EngineConfig make_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    EngineConfig config;
    if (!json_text.empty()) config.merge_json(json_text, base_dir);
    return config;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.attr("__version__") = std::string(kVersion);

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<ProviderError>(m, "ProviderError", base.ptr());

    m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"));
    m.def(
        "expand_abbreviations",
        [](const std::string& text) { return expand_abbreviations(text, AbbrDict::defaults()); },
        py::arg("text"), "Expand abbreviations with the built-in dictionary.");
    m.def(
        "detect_abbreviations",
        [](const std::string& text) {
            std::vector<std::pair<std::size_t, std::string>> out;
            for (auto& o : detect_abbreviations(text, AbbrDict::defaults())) out.emplace_back(o.offset, o.abbreviation);
            return out;
        },
        py::arg("text"));

    m.def(
        "recall_at_k",
        [](const std::vector<std::string>& ranked, const GroundTruth& gt, std::size_t k) {
            return recall_at_k(ranked, gt, k);
        },
        py::arg("ranked"), py::arg("groundtruth"), py::arg("k"));
    m.def(
        "reciprocal_rank",
        [](const std::vector<std::string>& ranked, const GroundTruth& gt) { return reciprocal_rank(ranked, gt); },
        py::arg("ranked"), py::arg("groundtruth"));
    m.def(
        "average_precision",
        [](const std::vector<std::string>& ranked, const GroundTruth& gt) { return average_precision(ranked, gt); },
        py::arg("ranked"), py::arg("groundtruth"));

    m.def(
        "fuzzy_match",
        [](const std::string& name, const std::filesystem::path& catalog, double threshold, bool containment) {
            FuzzyMatchOptions options{threshold, containment};
            return fuzzy_match(name, ingest_records(catalog), options);
        },
        py::arg("name"), py::arg("catalog"), py::arg("threshold") = 0.85, py::arg("containment") = true);

    m.def(
        "understand",
        [](const std::string& query) { return understood_to_dict(understand(query, UnderstandingConfig{})); },
        py::arg("query"), "Rule-based query understanding.");

    py::class_<Runtime>(m, "_Runtime")
        .def(py::init([](const std::string& config_json, const std::filesystem::path& base_dir) {
                 return std::make_unique<Runtime>(make_config(config_json, base_dir));
             }),
             py::arg("config_json") = "", py::arg("base_dir") = std::filesystem::path{})
        .def("search_json",
             [](const Runtime& rt, const std::string& query, bool explain) {
                 std::string out;
                 {
                     py::gil_scoped_release release;
                     out = search_response_json(rt.search(query), explain);
                 }
                 return out;
             },
             py::arg("query"), py::arg("explain") = false)
        .def("ranked_ids", &Runtime::ranked_ids, py::arg("query"), py::arg("depth"),
             py::call_guard<py::gil_scoped_release>())
        .def("evaluate_json",
             [](const Runtime& rt, const std::filesystem::path& bench, std::vector<std::size_t> ks,
                std::size_t threads) {
                 const auto cases = load_benchmark(bench);
                 const std::size_t depth = std::max(*std::max_element(ks.begin(), ks.end()),
                                                    rt.search_config().result_k);
                 py::gil_scoped_release release;
                 const auto report = evaluate(
                     cases, [&](const std::string& q, std::size_t d) { return rt.ranked_ids(q, d); },
                     std::move(ks), depth, threads);
                 return report_json(report, -1);
             },
             py::arg("bench"), py::arg("ks"), py::arg("threads") = 1)
        .def_property_readonly("size", [](const Runtime& rt) { return rt.engine().catalog().size(); });
}
