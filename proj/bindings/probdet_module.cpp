#include "probdet/corpus.hpp"
#include "probdet/error.hpp"
#include "probdet/evaluation.hpp"
#include "probdet/io_util.hpp"
#include "probdet/pipeline.hpp"
#include "probdet/reliability.hpp"
#include "probdet/text_features.hpp"

#include <json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <memory>

namespace py = pybind11;
using namespace probdet;
using nlohmann::json;

namespace {

py::object json_to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null: return py::none();
        case json::value_t::boolean: return py::bool_(j.get<bool>());
        case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
        case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
        case json::value_t::number_float: return py::float_(j.get<double>());
        case json::value_t::string: return py::str(j.get<std::string>());
        case json::value_t::array: {
            py::list out;
            for (const auto& item : j) out.append(json_to_py(item));
            return out;
        }
        case json::value_t::object: {
            py::dict out;
            for (const auto& [key, value] : j.items()) out[py::str(key)] = json_to_py(value);
            return out;
        }
        default: return py::none();
    }
}

EmbeddingTable glove_from_path(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open embeddings file: " + path);
    return load_glove(in);
}

// move-only pipeline behind a shared holder for python
struct PyPipeline {
    std::shared_ptr<TrainedPipeline> pipe;
};

PyPipeline train_py(const Corpus& corpus, const std::string& kind, std::uint64_t seed,
                    int ngram, const EmbeddingTable* embeddings, int max_epochs, double lr) {
    PipelineSpec spec = PipelineSpec::defaults(model_kind_from_string(kind));
    spec.seed = seed;
    if (ngram == 1) spec.ngram = {1, 1};
    if (ngram == 2) spec.ngram = {1, 2};
    spec.train.max_epochs = max_epochs;
    spec.train.lr = lr;
    auto pipe = std::make_shared<TrainedPipeline>(
        train_pipeline(spec, corpus.items, nullptr, embeddings, nullptr));
    return {std::move(pipe)};
}

}  // namespace

PYBIND11_MODULE(_probdet, m) {
    m.doc() = "Peer-review problem-statement detection: corpus curation, tf-idf "
              "classifiers, recurrent/attention networks and evaluation";
    m.attr("__version__") = "0.1.0";

    py::register_exception<Error>(m, "ProbdetError");

    py::class_<LabeledComment>(m, "LabeledComment")
        .def(py::init<>())
        .def_readwrite("id", &LabeledComment::id)
        .def_readwrite("text", &LabeledComment::text)
        .def_readwrite("label", &LabeledComment::label)
        .def("__repr__", [](const LabeledComment& c) {
            return "LabeledComment(id='" + c.id + "', label=" + std::to_string(c.label) + ")";
        });

    py::class_<Corpus>(m, "Corpus")
        .def(py::init<>())
        .def_readwrite("items", &Corpus::items)
        .def("__len__", [](const Corpus& c) { return c.items.size(); })
        .def("class_counts", [](const Corpus& c) {
            auto counts = c.class_counts();
            return py::make_tuple(counts[0], counts[1]);
        })
        .def("digest", &corpus_digest);

    py::class_<EmbeddingTable>(m, "EmbeddingTable")
        .def_readonly("dim", &EmbeddingTable::dim)
        .def("__len__", [](const EmbeddingTable& t) { return t.vectors.size(); });

    m.def("tokenize", &tokenize, py::arg("text"),
          "Case-folded alphanumeric tokens of length >= 2");
    m.def("split_sentences", [](const std::string& text) { return split_sentences(text); },
          py::arg("text"));

    m.def("generate_synthetic", &generate_synthetic, py::arg("n"), py::arg("noise"),
          py::arg("seed"), "Synthetic benchmark corpus with planted signal words");

    m.def("load_corpus", [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open corpus file: " + path);
        return read_corpus_jsonl(in);
    });
    m.def("save_corpus", [](const Corpus& corpus, const std::string& path) {
        write_file_atomic(path, corpus_to_jsonl(corpus));
    });

    m.def("load_glove", &glove_from_path, py::arg("path"));

    m.def(
        "krippendorff_alpha",
        [](const std::map<std::string, std::map<std::string, int>>& units) {
            ReliabilityTable table;
            table.units = units;
            ReliabilityResult r = krippendorff_alpha(table);
            py::dict out;
            out["alpha"] = r.alpha;
            out["observed_disagreement"] = r.observed_disagreement;
            out["expected_disagreement"] = r.expected_disagreement;
            out["pairable_values"] = r.pairable_values;
            return out;
        },
        py::arg("units"), "Nominal-data alpha over unit -> rater -> {0,1} ratings");

    m.def("compute_metrics", [](const std::vector<int>& pred, const std::vector<int>& gold) {
        Metrics metrics = compute_metrics(pred, gold);
        py::dict out;
        out["precision"] = metrics.precision;
        out["recall"] = metrics.recall;
        out["f1"] = metrics.f1;
        out["accuracy"] = metrics.accuracy;
        out["tp"] = metrics.confusion.tp;
        out["fp"] = metrics.confusion.fp;
        out["fn"] = metrics.confusion.fn;
        out["tn"] = metrics.confusion.tn;
        return out;
    });

    py::class_<PyPipeline>(m, "Pipeline")
        .def_property_readonly(
            "kind", [](const PyPipeline& p) { return to_string(p.pipe->spec.kind); })
        .def("predict",
             [](const PyPipeline& p, const std::string& text) {
                 Prediction pred = p.pipe->predict_text(text);
                 return py::make_tuple(pred.label, pred.score);
             },
             py::arg("text"), "Returns (label, score) for one comment")
        .def("top_coefficients",
             [](const PyPipeline& p, int k) {
                 const auto* linear = std::get_if<LinearModel>(&p.pipe->classical);
                 if (!linear) throw Error("top_coefficients requires a linear model");
                 CoefficientReport report = top_coefficients(*linear, p.pipe->vocab, k);
                 py::dict out;
                 out["positive"] = report.positive;
                 out["negative"] = report.negative;
                 return out;
             },
             py::arg("k") = 10)
        .def("save", [](const PyPipeline& p, const std::string& path) { p.pipe->save(path); })
        .def_static("load", [](const std::string& path) {
            return PyPipeline{std::make_shared<TrainedPipeline>(TrainedPipeline::load(path))};
        });

    m.def("train", &train_py, py::arg("corpus"), py::arg("kind"), py::arg("seed") = 0,
          py::arg("ngram") = 0, py::arg("embeddings") = nullptr, py::arg("max_epochs") = 30,
          py::arg("lr") = 1e-3,
          "Fit a pipeline (kind in {mnb, logreg, sgd, svm, random_forest, gradient_boost, "
          "adaboost, bigru, bigru_attention, han})");

    m.def(
        "cross_validate",
        [](const Corpus& corpus, const std::string& kind, int k, std::uint64_t seed, int ngram,
           const EmbeddingTable* embeddings, int max_epochs, double lr) {
            PipelineSpec spec = PipelineSpec::defaults(model_kind_from_string(kind));
            if (ngram == 1) spec.ngram = {1, 1};
            if (ngram == 2) spec.ngram = {1, 2};
            spec.train.max_epochs = max_epochs;
            spec.train.lr = lr;
            EvaluationReport report = evaluate_cv(spec, corpus, k, seed, embeddings);
            return json_to_py(json::parse(emit_report_json(report)));
        },
        py::arg("corpus"), py::arg("kind"), py::arg("k") = 20, py::arg("seed") = 0,
        py::arg("ngram") = 0, py::arg("embeddings") = nullptr, py::arg("max_epochs") = 30,
        py::arg("lr") = 1e-3, "k-fold cross-validation report as a dict");
}
