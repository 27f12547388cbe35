// Acceptance runner: each criterion prints one [PASS]/[FAIL] line; the
// process exits nonzero if any criterion fails. argv[1] must point at the
// CLI binary (used by the byte-determinism criterion).

#include "probdet/corpus.hpp"
#include "probdet/error.hpp"
#include "probdet/evaluation.hpp"
#include "probdet/io_util.hpp"
#include "probdet/pipeline.hpp"
#include "probdet/reliability.hpp"
#include "probdet/serve.hpp"
#include "probdet/text_features.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

using namespace probdet;
using nlohmann::json;

namespace {

std::string g_cli;
std::filesystem::path g_dir;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// --- criterion 1 -----------------------------------------------------------

std::optional<double> alpha_pair_oracle(const ReliabilityTable& table) {
    double n = 0.0, weighted_disagreement = 0.0;
    std::vector<int> pooled;
    for (const auto& [unit, ratings] : table.units) {
        if (ratings.size() < 2) continue;
        std::vector<int> values;
        for (const auto& [rater, v] : ratings) values.push_back(v);
        const double m = static_cast<double>(values.size());
        n += m;
        for (std::size_t a = 0; a < values.size(); ++a) {
            for (std::size_t b = 0; b < values.size(); ++b) {
                if (a != b && values[a] != values[b]) weighted_disagreement += 1.0 / (m - 1.0);
            }
        }
        pooled.insert(pooled.end(), values.begin(), values.end());
    }
    if (n == 0) return std::nullopt;
    double global_disagreement = 0.0;
    for (std::size_t a = 0; a < pooled.size(); ++a) {
        for (std::size_t b = 0; b < pooled.size(); ++b) {
            if (a != b && pooled[a] != pooled[b]) global_disagreement += 1.0;
        }
    }
    double de = global_disagreement / (n * (n - 1.0));
    if (de == 0.0) return std::nullopt;
    return 1.0 - (weighted_disagreement / n) / de;
}

bool criterion_krippendorff(std::string& detail) {
    auto start = std::chrono::steady_clock::now();
    Rng rng(1);
    int checked = 0;
    double worst = 0.0;
    while (checked < 200) {
        ReliabilityTable table;
        const auto units = 2 + rng.below(9);
        const auto raters = 2 + rng.below(3);
        for (std::uint64_t u = 0; u < units; ++u) {
            for (std::uint64_t r = 0; r < raters; ++r) {
                if (rng.unit_real() < 0.3) continue;
                table.units["u" + std::to_string(u)]["r" + std::to_string(r)] =
                    static_cast<int>(rng.below(2));
            }
        }
        for (auto it = table.units.begin(); it != table.units.end();) {
            it = it->second.empty() ? table.units.erase(it) : std::next(it);
        }
        auto expected = alpha_pair_oracle(table);
        if (!expected) {
            try {
                krippendorff_alpha(table);
                detail = "degenerate table did not raise";
                return false;
            } catch (const Error&) {
                continue;
            }
        }
        double got = krippendorff_alpha(table).alpha;
        worst = std::max(worst, std::abs(got - *expected));
        if (worst > 1e-12) {
            detail = "oracle mismatch " + std::to_string(worst);
            return false;
        }
        ++checked;
    }

    ReliabilityTable fixed;
    fixed.units["u1"] = {{"a", 1}, {"b", 1}};
    fixed.units["u2"] = {{"a", 0}, {"b", 0}};
    fixed.units["u3"] = {{"a", 1}, {"b", 0}};
    fixed.units["u4"] = {{"a", 1}};
    if (std::abs(krippendorff_alpha(fixed).alpha - 4.0 / 9.0) > 1e-12) {
        detail = "fixed example is not 4/9";
        return false;
    }
    ReliabilityResult after = krippendorff_alpha(drop_conflicting_units(fixed));
    if (after.alpha != 1.0) {
        detail = "alpha after conflict drop is not exactly 1";
        return false;
    }
    double elapsed = seconds_since(start);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "200 tables, max |diff| %.1e, %.2fs", worst, elapsed);
    detail = buf;
    return elapsed < 5.0;
}

// --- criterion 2 -----------------------------------------------------------

bool criterion_tfidf(std::string& detail) {
    std::vector<TokenSequence> docs = {tokenize("good work"), tokenize("not good"),
                                       tokenize("missing tests")};
    Vocabulary vocab = fit_vocabulary(docs, {1, 1});
    std::vector<SparseVector> counts;
    for (const auto& d : docs) counts.push_back(vectorize_counts(d, vocab));
    TfidfModel model = fit_idf(counts, 3, vocab.size());
    SparseVector d2 = transform_tfidf(counts[1], model);
    double v_not = d2.value_at(*vocab.lookup("not"));
    double v_good = d2.value_at(*vocab.lookup("good"));
    if (std::abs(v_not - 0.7960) > 1e-4 || std::abs(v_good - 0.6053) > 1e-4) {
        detail = "golden values off: " + std::to_string(v_not) + ", " + std::to_string(v_good);
        return false;
    }

    Rng rng(7);
    Corpus corpus = generate_synthetic(300, 0.1, 3);
    std::vector<TokenSequence> all;
    for (const auto& item : corpus.items) all.push_back(tokenize(item.text));
    Vocabulary big = fit_vocabulary(all, {1, 2});
    std::vector<SparseVector> big_counts;
    for (const auto& d : all) big_counts.push_back(vectorize_counts(d, big));
    TfidfModel big_model = fit_idf(big_counts, static_cast<std::int64_t>(big_counts.size()),
                                   big.size());
    for (const auto& c : big_counts) {
        SparseVector t = transform_tfidf(c, big_model);
        if (t.empty()) continue;
        if (std::abs(t.l2_norm() - 1.0) > 1e-12) {
            detail = "norm deviates by " + std::to_string(std::abs(t.l2_norm() - 1.0));
            return false;
        }
    }
    detail = "golden pair and 300 unit norms";
    return true;
}

// --- criterion 3 -----------------------------------------------------------

bool criterion_mnb(std::string& detail) {
    auto start = std::chrono::steady_clock::now();
    long corpora = 0;
    double worst = 0.0;
    for (int vsize = 1; vsize <= 5; ++vsize) {
        for (int ndocs = 2; ndocs <= 6; ++ndocs) {
            // deterministic count patterns, exhaustive label assignments
            std::vector<SparseVector> X;
            for (int i = 0; i < ndocs; ++i) {
                SparseVector row;
                row.dim = vsize;
                for (int t = 0; t < vsize; ++t) {
                    double c = static_cast<double>((i + t) % 3);
                    if (c != 0.0) row.push(t, c);
                }
                X.push_back(std::move(row));
            }
            for (unsigned labels = 1; labels + 1 < (1u << ndocs); ++labels) {
                std::vector<int> y;
                for (int i = 0; i < ndocs; ++i) y.push_back((labels >> i) & 1u);
                for (double alpha : {1.0, 0.5}) {
                    MnbModel model = fit_mnb(X, y, alpha);
                    ++corpora;
                    for (const auto& q : X) {
                        // closed-form oracle, recomputed from scratch
                        std::array<double, 2> expected{};
                        for (int c = 0; c < 2; ++c) {
                            double docs_c = 0, total_c = 0;
                            std::vector<double> count_c(static_cast<std::size_t>(vsize), 0.0);
                            for (std::size_t i = 0; i < X.size(); ++i) {
                                if (y[i] != c) continue;
                                docs_c += 1;
                                for (const auto& [t, v] : X[i].entries) {
                                    count_c[static_cast<std::size_t>(t)] += v;
                                    total_c += v;
                                }
                            }
                            expected[static_cast<std::size_t>(c)] =
                                std::log(docs_c / static_cast<double>(X.size()));
                            for (const auto& [t, v] : q.entries) {
                                expected[static_cast<std::size_t>(c)] +=
                                    v * std::log((count_c[static_cast<std::size_t>(t)] + alpha) /
                                                 (total_c + alpha * vsize));
                            }
                        }
                        auto got = mnb_log_posteriors(model, q);
                        worst = std::max({worst, std::abs(got[0] - expected[0]),
                                          std::abs(got[1] - expected[1])});
                        if (worst > 1e-12) {
                            detail = "posterior mismatch " + std::to_string(worst);
                            return false;
                        }
                    }
                }
            }
        }
    }
    double elapsed = seconds_since(start);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%ld corpora, max |diff| %.1e, %.2fs", corpora, worst,
                  elapsed);
    detail = buf;
    return elapsed < 30.0;
}

// --- criterion 4 -----------------------------------------------------------

bool criterion_gradients(std::string& detail) {
    auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::uint64_t seed : {11ULL, 22ULL, 33ULL}) {
        Rng rng(seed);
        auto sequence = [&](int len, int dim, int real) {
            EncodedSequence seq;
            seq.rows = Mat::Zero(len, dim);
            seq.mask.assign(static_cast<std::size_t>(len), 0);
            for (int t = 0; t < real; ++t) {
                seq.mask[static_cast<std::size_t>(t)] = 1;
                for (int j = 0; j < dim; ++j) seq.rows(t, j) = rng.uniform(-1.0, 1.0);
            }
            return seq;
        };

        {
            NetworkSpec spec;
            spec.kind = Architecture::mlp_precomputed;
            spec.input_dim = 24;
            spec.mlp_hidden1 = 12;
            spec.mlp_hidden2 = 6;
            spec.seed = seed;
            auto net = build_network(spec);
            Vec x(24);
            for (int i = 0; i < 24; ++i) x(i) = rng.uniform(-1.0, 1.0);
            worst = std::max(worst, gradient_check(*net, x, 1, 1e-5, seed));
        }
        {
            NetworkSpec spec;
            spec.kind = Architecture::bigru;
            spec.input_dim = 8;
            spec.gru_hidden = 5;
            spec.dense_hidden = 6;
            spec.seed = seed;
            auto net = build_network(spec);
            worst = std::max(worst, gradient_check(*net, sequence(10, 8, 7), 0, 1e-5, seed));
        }
        {
            NetworkSpec spec;
            spec.kind = Architecture::bigru_attention;
            spec.input_dim = 8;
            spec.gru_hidden = 5;
            spec.dense_hidden = 6;
            spec.seed = seed;
            auto net = build_network(spec);
            worst = std::max(worst, gradient_check(*net, sequence(10, 8, 6), 1, 1e-5, seed));
        }
        {
            NetworkSpec spec;
            spec.kind = Architecture::han;
            spec.input_dim = 8;
            spec.han_word_hidden = 4;
            spec.han_sentence_hidden = 4;
            spec.han_dense_hidden = 8;
            spec.seed = seed;
            auto net = build_network(spec);
            SentenceBatch batch;
            batch.push_back(sequence(8, 8, 6));
            batch.push_back(sequence(8, 8, 4));
            batch.push_back(sequence(8, 8, 3));
            worst = std::max(worst, gradient_check(*net, batch, 1, 1e-5, seed));
        }
        if (worst >= 1e-4) {
            detail = "max relative error " + std::to_string(worst);
            return false;
        }
    }
    double elapsed = seconds_since(start);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "4 architectures x 3 seeds, max rel err %.2e, %.1fs", worst,
                  elapsed);
    detail = buf;
    return elapsed < 120.0;
}

// --- criterion 5 -----------------------------------------------------------

bool criterion_curation(std::string& detail) {
    Corpus mock;
    for (int i = 0; i < 9490; ++i) {
        mock.items.push_back({"n" + std::to_string(i), "negative " + std::to_string(i), 0});
    }
    for (int i = 0; i < 9177; ++i) {
        mock.items.push_back({"p" + std::to_string(i), "positive " + std::to_string(i), 1});
    }
    Corpus balanced = downsample(mock, 17);
    auto counts = balanced.class_counts();
    if (counts[0] != 9177 || counts[1] != 9177 || balanced.items.size() != 18354) {
        detail = "downsample counts wrong";
        return false;
    }

    Corpus with_dups = generate_synthetic(200, 0.0, 5);
    with_dups.items.push_back({"dup1", with_dups.items[0].text, with_dups.items[0].label});
    with_dups.items.push_back({"dup2", with_dups.items[1].text, 1 - with_dups.items[1].label});
    Corpus once = deduplicate(with_dups);
    Corpus twice = deduplicate(once);
    if (once.items.size() != twice.items.size()) {
        detail = "dedup not idempotent";
        return false;
    }
    for (std::size_t i = 0; i < once.items.size(); ++i) {
        if (once.items[i].id != twice.items[i].id) {
            detail = "dedup not idempotent";
            return false;
        }
    }

    FoldPlan plan = make_folds(balanced, 20, 9);
    std::map<std::size_t, int> histogram;
    for (const auto& fold : plan.folds) histogram[fold.size()] += 1;
    if (histogram[918] != 14 || histogram[917] != 6) {
        detail = "20-fold sizes are not 14x918 + 6x917";
        return false;
    }

    SplitAssignment parts = split(balanced, {0.8, 0.1, 0.1}, 9);
    if (parts.train.size() != 14684 || parts.validation.size() != 1835 ||
        parts.test.size() != 1835) {
        detail = "80:10:10 sizes wrong";
        return false;
    }
    detail = "downsample 9177/9177, dedup idempotent, folds 14x918+6x917, split 14684/1835/1835";
    return true;
}

// --- criterion 6 -----------------------------------------------------------

bool criterion_benchmark(std::string& detail) {
    Corpus corpus = generate_synthetic(2000, 0.05, 42);

    struct Entry {
        ModelKind kind;
        double threshold;
    };
    const std::vector<Entry> classical = {
        {ModelKind::logreg, 0.93}, {ModelKind::sgd, 0.93}, {ModelKind::svm, 0.93},
        {ModelKind::mnb, 0.93},    {ModelKind::random_forest, 0.90},
        {ModelKind::adaboost, 0.90}, {ModelKind::gradient_boost, 0.90},
    };

    auto classical_start = std::chrono::steady_clock::now();
    std::ostringstream medians;
    for (const auto& entry : classical) {
        PipelineSpec spec = PipelineSpec::defaults(entry.kind);
        EvaluationReport report = evaluate_cv(spec, corpus, 20, 42);
        medians << to_string(entry.kind) << "=" << report.summary.median << " ";
        if (report.summary.median < entry.threshold) {
            detail = to_string(entry.kind) + " median " + std::to_string(report.summary.median) +
                     " below " + std::to_string(entry.threshold);
            return false;
        }
    }
    double classical_elapsed = seconds_since(classical_start);
    if (classical_elapsed >= 120.0) {
        detail = "classical suite too slow: " + std::to_string(classical_elapsed) + "s";
        return false;
    }

    // 8-d toy embedding table over the corpus vocabulary
    EmbeddingTable table;
    table.dim = 8;
    {
        std::set<std::string> words;
        for (const auto& item : corpus.items) {
            for (const auto& token : tokenize(item.text)) words.insert(token);
        }
        Rng rng(271828);
        for (const auto& word : words) {
            std::vector<double> v(8);
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            table.vectors.emplace(word, std::move(v));
        }
    }

    auto neural_start = std::chrono::steady_clock::now();
    for (ModelKind kind : {ModelKind::bigru_attention, ModelKind::han}) {
        PipelineSpec spec = PipelineSpec::defaults(kind);
        spec.net.gru_hidden = 16;
        spec.net.dense_hidden = 16;
        spec.net.han_word_hidden = 12;
        spec.net.han_sentence_hidden = 12;
        spec.net.han_dense_hidden = 24;
        spec.train.max_epochs = 30;
        spec.train.patience = 8;
        spec.train.batch_size = 16;
        spec.train.lr = 3e-3;
        EvaluationReport report = evaluate_cv(spec, corpus, 20, 42, &table);
        medians << to_string(kind) << "=" << report.summary.median << " ";
        if (report.summary.median < 0.90) {
            detail = to_string(kind) + " median " + std::to_string(report.summary.median) +
                     " below 0.90";
            return false;
        }
    }
    double neural_elapsed = seconds_since(neural_start);
    if (neural_elapsed >= 600.0) {
        detail = "neural suite too slow: " + std::to_string(neural_elapsed) + "s";
        return false;
    }

    char buf[64];
    std::snprintf(buf, sizeof(buf), "(classical %.0fs, neural %.0fs)", classical_elapsed,
                  neural_elapsed);
    detail = medians.str() + buf;
    return true;
}

// --- criterion 7 -----------------------------------------------------------

bool criterion_coefficients(std::string& detail) {
    Corpus corpus = generate_synthetic(2000, 0.05, 42);
    PipelineSpec spec = PipelineSpec::defaults(ModelKind::logreg);
    spec.seed = 42;
    TrainedPipeline pipe = train_pipeline(spec, corpus.items);
    CoefficientReport report =
        top_coefficients(std::get<LinearModel>(pipe.classical), pipe.vocab, 15);

    std::set<std::string> positive, negative;
    for (const auto& [term, weight] : report.positive) positive.insert(term);
    for (const auto& [term, weight] : report.negative) negative.insert(term);
    for (const auto& word : synthetic_problem_lexicon()) {
        if (!positive.count(word)) {
            detail = "problem word '" + word + "' missing from top-15 positive";
            return false;
        }
    }
    for (const auto& word : synthetic_praise_lexicon()) {
        if (!negative.count(word)) {
            detail = "praise word '" + word + "' missing from top-15 negative";
            return false;
        }
    }
    detail = "8 problem words in top-15 positive, 6 praise words in top-15 negative";
    return true;
}

// --- criterion 8 -----------------------------------------------------------

bool criterion_determinism(std::string& detail) {
    Corpus corpus = generate_synthetic(600, 0.05, 7);
    auto corpus_path = g_dir / "det_corpus.jsonl";
    write_file_atomic(corpus_path, corpus_to_jsonl(corpus));

    auto run_once = [&](const std::string& tag) {
        auto report = g_dir / ("det_report_" + tag + ".json");
        std::string cmd = g_cli + " crossval --input " + corpus_path.string() +
                          " --model-kind sgd --k 10 --seed 123 --output " + report.string() +
                          " --boxplot >/dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    if (!run_once("a") || !run_once("b")) {
        detail = "crossval invocation failed";
        return false;
    }
    std::string json_a = read_file(g_dir / "det_report_a.json");
    std::string json_b = read_file(g_dir / "det_report_b.json");
    std::string svg_a = read_file(g_dir / "det_report_a.svg");
    std::string svg_b = read_file(g_dir / "det_report_b.svg");
    if (json_a != json_b) {
        detail = "report JSON differs between runs";
        return false;
    }
    if (svg_a != svg_b) {
        detail = "boxplot SVG differs between runs";
        return false;
    }
    detail = "two crossval runs byte-identical (JSON " + std::to_string(json_a.size()) +
             " bytes, SVG " + std::to_string(svg_a.size()) + " bytes)";
    return true;
}

// --- criterion 9 -----------------------------------------------------------

bool criterion_no_leakage(std::string& detail) {
    Corpus corpus = generate_synthetic(200, 0.0, 11);
    FoldPlan plan = make_folds(corpus, 5, 2);
    // one distinct sentinel per fold, present only in that fold's comments
    std::map<std::string, int> fold_of;
    for (int f = 0; f < plan.k; ++f) {
        for (const auto& id : plan.folds[static_cast<std::size_t>(f)]) fold_of[id] = f;
    }
    for (auto& item : corpus.items) {
        item.text += " qsentinel" + std::to_string(fold_of[item.id]) + "q";
    }
    PipelineSpec spec = PipelineSpec::defaults(ModelKind::logreg);
    bool leaked = false;
    cross_validate(spec, corpus, plan, nullptr, nullptr,
                   [&](int fold, const TrainedPipeline& pipe) {
                       std::string own = "qsentinel" + std::to_string(fold) + "q";
                       if (pipe.vocab.lookup(own).has_value()) leaked = true;
                       for (int other = 0; other < 5; ++other) {
                           if (other == fold) continue;
                           std::string term = "qsentinel" + std::to_string(other) + "q";
                           if (!pipe.vocab.lookup(term).has_value()) leaked = true;
                       }
                   });
    if (leaked) {
        detail = "a fold vocabulary contained its held-out sentinel";
        return false;
    }
    detail = "5 folds, held-out sentinels absent from every fold vocabulary";
    return true;
}

// --- criterion 10 ----------------------------------------------------------

bool criterion_serve(std::string& detail) {
    Corpus corpus = generate_synthetic(300, 0.05, 13);
    PipelineSpec spec = PipelineSpec::defaults(ModelKind::svm);
    spec.seed = 5;
    TrainedPipeline pipe = train_pipeline(spec, corpus.items);
    std::string blob = pipe.to_json_string();
    TrainedPipeline reference = TrainedPipeline::from_json_string(blob);

    ScoringServer server(std::move(pipe));
    int port = server.bind_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    bool ok = true;
    std::string why;
    {
        httplib::Client client("127.0.0.1", port);
        auto health = client.Get("/health");
        if (!health || health->status != 200) {
            ok = false;
            why = "/health did not answer 200";
        }
        auto malformed = client.Post("/predict", "{", "application/json");
        if (ok && (!malformed || malformed->status != 400)) {
            ok = false;
            why = "malformed body did not answer 400";
        }
        if (ok) {
            Corpus probes = generate_synthetic(200, 0.2, 999);
            for (int i = 0; i < 100 && ok; ++i) {
                const auto& text = probes.items[static_cast<std::size_t>(i)].text;
                auto res = client.Post("/predict", json{{"text", text}}.dump(),
                                       "application/json");
                if (!res || res->status != 200) {
                    ok = false;
                    why = "predict request failed";
                    break;
                }
                json body = json::parse(res->body);
                Prediction expected = reference.predict_text(text);
                if (body["label"].get<int>() != expected.label ||
                    body["score"].get<double>() != expected.score) {
                    ok = false;
                    why = "HTTP and library predictions diverge";
                }
            }
        }
    }
    server.stop();
    worker.join();
    detail = ok ? "100 comments match exactly; 400 and /health behave" : why;
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance_tests /path/to/probdet-cli\n";
        return 2;
    }
    g_cli = argv[1];
    g_dir = std::filesystem::temp_directory_path() /
            ("probdet-acceptance-" + std::to_string(::getpid()));
    std::filesystem::create_directories(g_dir);

    struct Criterion {
        int id;
        const char* name;
        std::function<bool(std::string&)> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "Krippendorff alpha matches the pair-enumeration oracle", criterion_krippendorff},
        {2, "tf-idf golden example and unit norms", criterion_tfidf},
        {3, "multinomial NB equals the closed-form oracle", criterion_mnb},
        {4, "gradient checks across all architectures", criterion_gradients},
        {5, "curation invariants (downsample, dedup, folds, split)", criterion_curation},
        {6, "synthetic-corpus benchmark medians", criterion_benchmark},
        {7, "planted lexicon appears in the top coefficients", criterion_coefficients},
        {8, "crossval byte-determinism (JSON and SVG)", criterion_determinism},
        {9, "per-fold vocabulary holds no held-out sentinel", criterion_no_leakage},
        {10, "HTTP scoring matches library predictions", criterion_serve},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        std::string detail;
        bool passed = false;
        try {
            passed = criterion.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %2d: %s — %s\n", passed ? "PASS" : "FAIL", criterion.id,
                    criterion.name, detail.c_str());
        std::fflush(stdout);
        if (!passed) ++failures;
    }
    std::filesystem::remove_all(g_dir);
    if (failures > 0) {
        std::printf("%d of %zu criteria failed\n", failures, criteria.size());
        return 1;
    }
    std::printf("all %zu criteria passed\n", criteria.size());
    return 0;
}
