#include "probdet/corpus.hpp"
#include "probdet/error.hpp"
#include "probdet/evaluation.hpp"
#include "probdet/io_util.hpp"
#include "probdet/pipeline.hpp"
#include "probdet/reliability.hpp"
#include "probdet/serve.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using nlohmann::json;
using namespace probdet;

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open input file: " + path);
    return in;
}

Corpus load_corpus(const std::string& path) {
    auto in = open_input(path);
    return read_corpus_jsonl(in);
}

json reliability_to_json(const ReliabilityTable& table) {
    try {
        ReliabilityResult r = krippendorff_alpha(table);
        return {{"alpha", r.alpha},
                {"observed_disagreement", r.observed_disagreement},
                {"expected_disagreement", r.expected_disagreement},
                {"pairable_values", r.pairable_values}};
    } catch (const Error& e) {
        return {{"alpha", nullptr}, {"error", e.what()}};
    }
}

std::array<double, 3> parse_ratios(const std::string& text) {
    std::array<double, 3> ratios{};
    std::istringstream in(text);
    std::string part;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(in, part, ':')) throw Error("--ratios expects a:b:c");
        ratios[static_cast<std::size_t>(i)] = string_to_double(part);
    }
    if (std::getline(in, part, ':')) throw Error("--ratios expects exactly three parts");
    // accept either fractions (0.8:0.1:0.1) or proportions (80:10:10)
    double total = ratios[0] + ratios[1] + ratios[2];
    if (total > 1.5) {
        for (auto& r : ratios) r /= total;
    }
    return ratios;
}

NgramRange ngram_from_flag(int ngram) {
    if (ngram == 1) return {1, 1};
    if (ngram == 2) return {1, 2};
    throw Error("--ngram must be 1 or 2");
}

struct CommonModelArgs {
    std::string model_kind;
    std::optional<int> ngram;
    std::string embeddings_path;
    std::string precomputed_path;
    std::uint64_t seed = 0;
};

PipelineSpec build_spec(const CommonModelArgs& args) {
    PipelineSpec spec = PipelineSpec::defaults(model_kind_from_string(args.model_kind));
    if (args.ngram) spec.ngram = ngram_from_flag(*args.ngram);
    spec.seed = args.seed;
    return spec;
}

struct LoadedResources {
    std::optional<EmbeddingTable> embeddings;
    std::optional<PrecomputedVectors> precomputed;

    const EmbeddingTable* embeddings_ptr() const {
        return embeddings ? &*embeddings : nullptr;
    }
    const PrecomputedVectors* precomputed_ptr() const {
        return precomputed ? &*precomputed : nullptr;
    }
};

LoadedResources load_resources(const CommonModelArgs& args) {
    LoadedResources res;
    if (!args.embeddings_path.empty()) {
        auto in = open_input(args.embeddings_path);
        res.embeddings = load_glove(in);
    }
    if (!args.precomputed_path.empty()) {
        auto in = open_input(args.precomputed_path);
        res.precomputed = load_precomputed(in);
    }
    return res;
}

std::string boxplot_path_for(const std::string& output) {
    auto dot = output.rfind('.');
    if (dot == std::string::npos || output.find('/', dot) != std::string::npos) {
        return output + ".svg";
    }
    return output.substr(0, dot) + ".svg";
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Classifiers that decide whether a peer-review comment detects a problem"};
    app.require_subcommand(1);

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark corpus");
    int synth_n = 2000;
    double synth_noise = 0.05;
    std::uint64_t synth_seed = 42;
    std::string synth_output;
    synth->add_option("--n", synth_n, "Corpus size (even, >= 10)");
    synth->add_option("--noise", synth_noise, "Label flip fraction in [0,1)");
    synth->add_option("--seed", synth_seed, "RNG seed");
    synth->add_option("--output", synth_output, "Output corpus JSONL")->required();

    // --- ingest ---
    auto* ingest_cmd = app.add_subcommand(
        "ingest", "Curate raw tag records into a balanced labeled corpus");
    std::string ingest_input, ingest_output, ingest_log;
    std::uint64_t ingest_seed = 0;
    ingest_cmd->add_option("--input", ingest_input, "Raw tag records JSONL")->required();
    ingest_cmd->add_option("--output", ingest_output, "Curated corpus JSONL")->required();
    ingest_cmd->add_option("--log", ingest_log, "Curation log JSON path");
    ingest_cmd->add_option("--seed", ingest_seed, "Down-sampling seed");

    // --- reliability ---
    auto* rel = app.add_subcommand("reliability", "Inter-rater reliability report");
    std::string rel_input, rel_output;
    rel->add_option("--input", rel_input, "Raw tag records JSONL")->required();
    rel->add_option("--output", rel_output, "Report JSON path (stdout when omitted)");

    // --- prepare ---
    auto* prepare = app.add_subcommand("prepare", "Write a split or fold plan");
    std::string prep_input, prep_output, prep_ratios;
    int prep_k = 0;
    std::uint64_t prep_seed = 0;
    prepare->add_option("--input", prep_input, "Corpus JSONL")->required();
    prepare->add_option("--output", prep_output, "Output JSON")->required();
    prepare->add_option("--ratios", prep_ratios, "train:val:test, e.g. 80:10:10");
    prepare->add_option("--k", prep_k, "Fold count for a cross-validation plan");
    prepare->add_option("--seed", prep_seed, "Shuffle seed");

    // --- train ---
    auto* train = app.add_subcommand("train", "Fit a pipeline and write a model file");
    CommonModelArgs train_args;
    std::string train_input, train_model_file, train_history;
    std::optional<int> train_ngram;
    train->add_option("--input", train_input, "Corpus JSONL")->required();
    train->add_option("--model-kind", train_args.model_kind, "Classifier kind")->required();
    train->add_option("--model-file", train_model_file, "Output model JSON")->required();
    train->add_option("--history", train_history,
                      "Per-epoch training record JSON (neural kinds)");
    train->add_option("--ngram", train_ngram, "1 = uni-grams, 2 = uni+bi-grams");
    train->add_option("--embeddings", train_args.embeddings_path, "GloVe-format word vectors");
    train->add_option("--precomputed", train_args.precomputed_path,
                      "Precomputed 768-d vectors JSONL");
    train->add_option("--seed", train_args.seed, "Training seed");

    // --- evaluate ---
    auto* evaluate = app.add_subcommand("evaluate", "Score a corpus with a trained model");
    std::string eval_input, eval_model, eval_output, eval_precomputed;
    evaluate->add_option("--input", eval_input, "Corpus JSONL")->required();
    evaluate->add_option("--model-file", eval_model, "Model JSON")->required();
    evaluate->add_option("--precomputed", eval_precomputed, "Precomputed vectors JSONL");
    evaluate->add_option("--output", eval_output, "Metrics JSON path (stdout when omitted)");

    // --- crossval ---
    auto* crossval = app.add_subcommand("crossval", "k-fold cross-validation report");
    CommonModelArgs cv_args;
    std::string cv_input, cv_output, cv_csv;
    std::optional<int> cv_ngram;
    int cv_k = 20;
    bool cv_boxplot = false;
    crossval->add_option("--input", cv_input, "Corpus JSONL")->required();
    crossval->add_option("--model-kind", cv_args.model_kind, "Classifier kind")->required();
    crossval->add_option("--k", cv_k, "Fold count");
    crossval->add_option("--seed", cv_args.seed, "Fold/shuffle seed");
    crossval->add_option("--ngram", cv_ngram, "1 = uni-grams, 2 = uni+bi-grams");
    crossval->add_option("--embeddings", cv_args.embeddings_path, "GloVe-format word vectors");
    crossval->add_option("--precomputed", cv_args.precomputed_path,
                         "Precomputed 768-d vectors JSONL");
    crossval->add_option("--output", cv_output, "Report JSON path")->required();
    crossval->add_option("--csv", cv_csv, "Also write the per-fold CSV here");
    crossval->add_flag("--boxplot", cv_boxplot, "Also write a boxplot SVG next to the report");

    // --- inspect ---
    auto* inspect = app.add_subcommand("inspect", "Top model coefficients per direction");
    std::string ins_model, ins_output;
    int ins_top_k = 10;
    inspect->add_option("--model-file", ins_model, "Model JSON")->required();
    inspect->add_option("--top-k", ins_top_k, "Coefficients per direction");
    inspect->add_option("--output", ins_output, "Report JSON path (stdout when omitted)");

    // --- predict ---
    auto* predict = app.add_subcommand("predict", "Label texts with a trained model");
    std::string pred_input, pred_model, pred_output, pred_precomputed;
    predict->add_option("--input", pred_input, "JSONL with {id, text}")->required();
    predict->add_option("--model-file", pred_model, "Model JSON")->required();
    predict->add_option("--precomputed", pred_precomputed, "Precomputed vectors JSONL");
    predict->add_option("--output", pred_output, "Predictions JSONL path (stdout when omitted)");

    // --- serve ---
    auto* serve = app.add_subcommand("serve", "HTTP scoring endpoint");
    std::string serve_model, serve_bind = "127.0.0.1:8080";
    std::size_t serve_max_body = 65536;
    serve->add_option("--model-file", serve_model, "Model JSON")->required();
    serve->add_option("--bind", serve_bind, "host:port");
    serve->add_option("--max-body", serve_max_body, "Maximum request body bytes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help(app.get_name(), CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;  // usage error
    }

    auto emit = [](const std::string& path, const std::string& content) {
        if (path.empty()) {
            std::cout << content;
        } else {
            write_file_atomic(path, content);
        }
    };

    if (*synth) {
        Corpus corpus = generate_synthetic(synth_n, synth_noise, synth_seed);
        write_file_atomic(synth_output, corpus_to_jsonl(corpus));
        return 0;
    }

    if (*ingest_cmd) {
        auto in = open_input(ingest_input);
        auto records = ingest(in);

        json log;
        log["input_records"] = records.size();
        ReliabilityTable table = table_from_records(records);
        json before = reliability_to_json(table);
        json after = reliability_to_json(drop_conflicting_units(table));
        log["alpha_before"] = before.contains("error") ? json(nullptr) : before["alpha"];
        log["alpha_after"] = after.contains("error") ? json(nullptr) : after["alpha"];

        auto [comments, conflicts] = consolidate(records);
        Corpus corpus;
        corpus.items = std::move(comments);
        corpus.provenance.input_records = static_cast<std::int64_t>(records.size());
        corpus.provenance.conflicts_dropped = conflicts;
        corpus = deduplicate(corpus);
        corpus = downsample(corpus, ingest_seed);

        log["conflicts_dropped"] = corpus.provenance.conflicts_dropped;
        log["duplicates_dropped"] = corpus.provenance.duplicates_dropped;
        log["downsampled_dropped"] = corpus.provenance.downsampled_dropped;
        log["final_count"] = corpus.provenance.final_count;

        write_file_atomic(ingest_output, corpus_to_jsonl(corpus));
        if (!ingest_log.empty()) write_file_atomic(ingest_log, log.dump(2) + "\n");
        return 0;
    }

    if (*rel) {
        auto in = open_input(rel_input);
        auto records = ingest(in);
        ReliabilityTable table = table_from_records(records);
        json report{{"alpha_before", reliability_to_json(table)},
                    {"alpha_after", reliability_to_json(drop_conflicting_units(table))}};
        emit(rel_output, report.dump(2) + "\n");
        return 0;
    }

    if (*prepare) {
        Corpus corpus = load_corpus(prep_input);
        const bool want_split = !prep_ratios.empty();
        const bool want_folds = prep_k > 0;
        if (want_split == want_folds) {
            throw Error("prepare needs exactly one of --ratios or --k");
        }
        if (want_split) {
            SplitAssignment parts = split(corpus, parse_ratios(prep_ratios), prep_seed);
            json out{{"seed", prep_seed},
                     {"train", parts.train},
                     {"validation", parts.validation},
                     {"test", parts.test}};
            write_file_atomic(prep_output, out.dump(2) + "\n");
        } else {
            FoldPlan plan = make_folds(corpus, prep_k, prep_seed);
            json out{{"k", plan.k}, {"seed", prep_seed}, {"folds", plan.folds}};
            write_file_atomic(prep_output, out.dump(2) + "\n");
        }
        return 0;
    }

    if (*train) {
        train_args.ngram = train_ngram;
        Corpus corpus = load_corpus(train_input);
        PipelineSpec spec = build_spec(train_args);
        if (!train_history.empty() && !is_neural(spec.kind)) {
            throw Error("--history applies to neural model kinds only");
        }
        LoadedResources res = load_resources(train_args);
        TrainHistory history;
        TrainedPipeline pipe = train_pipeline(spec, corpus.items, nullptr, res.embeddings_ptr(),
                                              res.precomputed_ptr(), &history);
        pipe.save(train_model_file);
        if (!train_history.empty()) {
            json epochs = json::array();
            for (const auto& epoch : history.epochs) {
                epochs.push_back({{"train_loss", epoch.train_loss}, {"val_f1", epoch.val_f1}});
            }
            write_file_atomic(train_history, epochs.dump(2) + "\n");
        }
        return 0;
    }

    if (*evaluate) {
        Corpus corpus = load_corpus(eval_input);
        TrainedPipeline pipe = TrainedPipeline::load(eval_model);
        std::optional<PrecomputedVectors> pre;
        if (!eval_precomputed.empty()) {
            auto in = open_input(eval_precomputed);
            pre = load_precomputed(in);
        }
        std::vector<int> predictions, gold;
        for (const auto& item : corpus.items) {
            predictions.push_back(pipe.predict_comment(item, pre ? &*pre : nullptr).label);
            gold.push_back(item.label);
        }
        Metrics m = compute_metrics(predictions, gold);
        json out{{"confusion",
                  {{"tp", m.confusion.tp},
                   {"fp", m.confusion.fp},
                   {"fn", m.confusion.fn},
                   {"tn", m.confusion.tn}}},
                 {"precision", m.precision},
                 {"recall", m.recall},
                 {"f1", m.f1},
                 {"accuracy", m.accuracy},
                 {"n", corpus.items.size()}};
        emit(eval_output, out.dump(2) + "\n");
        return 0;
    }

    if (*crossval) {
        cv_args.ngram = cv_ngram;
        Corpus corpus = load_corpus(cv_input);
        PipelineSpec spec = build_spec(cv_args);
        LoadedResources res = load_resources(cv_args);
        EvaluationReport report = evaluate_cv(spec, corpus, cv_k, cv_args.seed,
                                              res.embeddings_ptr(), res.precomputed_ptr());
        write_file_atomic(cv_output, emit_report_json(report));
        if (!cv_csv.empty()) write_file_atomic(cv_csv, emit_report_csv(report));
        if (cv_boxplot) {
            std::string svg = render_boxplot({{to_string(spec.kind), report.summary}});
            write_file_atomic(boxplot_path_for(cv_output), svg);
        }
        return 0;
    }

    if (*inspect) {
        TrainedPipeline pipe = TrainedPipeline::load(ins_model);
        const auto* linear = std::get_if<LinearModel>(&pipe.classical);
        if (!linear) {
            throw Error("inspect requires a linear model (logreg, sgd or svm)");
        }
        CoefficientReport report = top_coefficients(*linear, pipe.vocab, ins_top_k);
        auto to_json_pairs = [](const std::vector<std::pair<std::string, double>>& entries) {
            json arr = json::array();
            for (const auto& [term, weight] : entries) {
                arr.push_back({{"term", term}, {"weight", weight}});
            }
            return arr;
        };
        json out{{"positive", to_json_pairs(report.positive)},
                 {"negative", to_json_pairs(report.negative)}};
        emit(ins_output, out.dump(2) + "\n");
        return 0;
    }

    if (*predict) {
        TrainedPipeline pipe = TrainedPipeline::load(pred_model);
        std::optional<PrecomputedVectors> pre;
        if (!pred_precomputed.empty()) {
            auto in = open_input(pred_precomputed);
            pre = load_precomputed(in);
        }
        auto in = open_input(pred_input);
        std::string line, out;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("text")) {
                throw Error("line " + std::to_string(line_no) +
                            ": expected JSON object with id and text");
            }
            LabeledComment item{j["id"].get<std::string>(), j["text"].get<std::string>(), 0};
            Prediction p = pipe.predict_comment(item, pre ? &*pre : nullptr);
            out += json{{"id", item.id}, {"label", p.label}, {"score", p.score}}.dump();
            out += '\n';
        }
        emit(pred_output, out);
        return 0;
    }

    if (*serve) {
        auto colon = serve_bind.rfind(':');
        if (colon == std::string::npos) throw Error("--bind expects host:port");
        std::string host = serve_bind.substr(0, colon);
        int port = std::stoi(serve_bind.substr(colon + 1));
        ScoringServer server(TrainedPipeline::load(serve_model), serve_max_body);
        std::cerr << "serving " << to_string(server.pipeline().spec.kind) << " on " << host << ":"
                  << port << "\n";
        if (!server.listen(host, port)) {
            throw Error("cannot bind " + serve_bind);
        }
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const probdet::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
