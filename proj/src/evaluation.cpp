#include "probdet/evaluation.hpp"

#include "probdet/error.hpp"
#include "probdet/io_util.hpp"
#include "probdet/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace probdet {

using nlohmann::json;

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& gold) {
    if (predictions.size() != gold.size()) throw Error("compute_metrics: length mismatch");
    if (predictions.empty()) throw Error("compute_metrics: empty input");
    Metrics m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == 1 && gold[i] == 1) ++m.confusion.tp;
        else if (predictions[i] == 1 && gold[i] == 0) ++m.confusion.fp;
        else if (predictions[i] == 0 && gold[i] == 1) ++m.confusion.fn;
        else ++m.confusion.tn;
    }
    const auto& c = m.confusion;
    m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
                                  : 0.0;
    m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                               : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    return m;
}

FoldScores cross_validate(const PipelineSpec& spec, const Corpus& corpus, const FoldPlan& plan,
                          const EmbeddingTable* embeddings,
                          const PrecomputedVectors* precomputed, const FoldObserver& observer) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < corpus.items.size(); ++i) index.emplace(corpus.items[i].id, i);

    FoldScores scores;
    for (int f = 0; f < plan.k; ++f) {
        std::vector<LabeledComment> train_items;
        std::vector<LabeledComment> held_out;
        for (int g = 0; g < plan.k; ++g) {
            for (const auto& id : plan.folds[static_cast<std::size_t>(g)]) {
                auto it = index.find(id);
                if (it == index.end()) throw Error("fold plan references unknown id '" + id + "'");
                (g == f ? held_out : train_items).push_back(corpus.items[it->second]);
            }
        }
        bool saw[2] = {false, false};
        for (const auto& item : train_items) saw[static_cast<std::size_t>(item.label)] = true;
        if (!saw[0] || !saw[1]) {
            throw Error("fold " + std::to_string(f) + ": training portion has a single class");
        }

        PipelineSpec fold_spec = spec;
        fold_spec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(f));
        TrainedPipeline pipe =
            train_pipeline(fold_spec, train_items, nullptr, embeddings, precomputed);
        if (observer) observer(f, pipe);

        std::vector<int> predictions, gold;
        predictions.reserve(held_out.size());
        for (const auto& item : held_out) {
            predictions.push_back(pipe.predict_comment(item, precomputed).label);
            gold.push_back(item.label);
        }
        Metrics m = compute_metrics(predictions, gold);
        scores.f1.push_back(m.f1);
        scores.precision.push_back(m.precision);
        scores.recall.push_back(m.recall);
        scores.accuracy.push_back(m.accuracy);
    }
    return scores;
}

namespace {

// linear interpolation between order statistics (q in [0, 1])
double quantile_sorted(const std::vector<double>& sorted, double q) {
    const auto n = sorted.size();
    double pos = q * static_cast<double>(n - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    double frac = pos - std::floor(pos);
    if (lo + 1 >= n) return sorted[n - 1];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

ScoreSummary summarize_scores(const std::vector<double>& scores) {
    if (scores.size() < 2) throw Error("summarize_scores requires at least 2 scores");
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());

    ScoreSummary s;
    s.min = sorted.front();
    s.max = sorted.back();
    s.median = quantile_sorted(sorted, 0.5);
    s.q1 = quantile_sorted(sorted, 0.25);
    s.q3 = quantile_sorted(sorted, 0.75);
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
             static_cast<double>(sorted.size());
    double ss = 0.0;
    for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(ss / static_cast<double>(sorted.size() - 1));

    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr;
    const double hi_fence = s.q3 + 1.5 * iqr;
    s.whisker_lo = s.max;
    s.whisker_hi = s.min;
    for (double v : sorted) {
        if (v < lo_fence || v > hi_fence) {
            s.outliers.push_back(v);
        } else {
            s.whisker_lo = std::min(s.whisker_lo, v);
            s.whisker_hi = std::max(s.whisker_hi, v);
        }
    }
    if (s.outliers.size() == sorted.size()) {  // cannot happen with finite IQR, but stay safe
        s.whisker_lo = s.q1;
        s.whisker_hi = s.q3;
    }
    return s;
}

EvaluationReport evaluate_cv(const PipelineSpec& spec, const Corpus& corpus, int k,
                             std::uint64_t seed, const EmbeddingTable* embeddings,
                             const PrecomputedVectors* precomputed) {
    FoldPlan plan = make_folds(corpus, k, seed);
    EvaluationReport report;
    report.pipeline_json = pipeline_summary_json(spec);
    report.k = k;
    report.seed = seed;
    report.corpus_digest = corpus_digest(corpus);
    PipelineSpec seeded = spec;
    seeded.seed = seed;
    report.scores = cross_validate(seeded, corpus, plan, embeddings, precomputed);
    report.summary = summarize_scores(report.scores.f1);
    return report;
}

// ---------------------------------------------------------------------------
// boxplot
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) { return double_to_string(v); }

}  // namespace

std::string render_boxplot(const std::vector<std::pair<std::string, ScoreSummary>>& summaries) {
    if (summaries.empty()) throw Error("render_boxplot requires at least one summary");

    const double slot = 120.0, margin = 60.0, top = 20.0, plot_h = 300.0;
    const double width = margin * 2 + slot * static_cast<double>(summaries.size());
    const double height = top + plot_h + 60.0;

    double lo = summaries[0].second.min, hi = summaries[0].second.max;
    for (const auto& [name, s] : summaries) {
        lo = std::min(lo, s.min);
        hi = std::max(hi, s.max);
    }
    double span = hi - lo;
    if (span <= 0) span = 1.0;
    lo -= span * 0.05;
    hi += span * 0.05;

    auto y_of = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + fmt(width) +
           "\" height=\"" + fmt(height) + "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
           "\" fill=\"white\"/>\n";

    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const auto& [name, s] = summaries[i];
        const double cx = margin + slot * (static_cast<double>(i) + 0.5);
        const double box_w = 60.0;
        const double x0 = cx - box_w / 2, x1 = cx + box_w / 2;

        // whiskers
        svg += "<line x1=\"" + fmt(cx) + "\" y1=\"" + fmt(y_of(s.whisker_lo)) + "\" x2=\"" +
               fmt(cx) + "\" y2=\"" + fmt(y_of(s.q1)) + "\" stroke=\"black\"/>\n";
        svg += "<line x1=\"" + fmt(cx) + "\" y1=\"" + fmt(y_of(s.q3)) + "\" x2=\"" + fmt(cx) +
               "\" y2=\"" + fmt(y_of(s.whisker_hi)) + "\" stroke=\"black\"/>\n";
        svg += "<line x1=\"" + fmt(x0 + 10) + "\" y1=\"" + fmt(y_of(s.whisker_lo)) + "\" x2=\"" +
               fmt(x1 - 10) + "\" y2=\"" + fmt(y_of(s.whisker_lo)) + "\" stroke=\"black\"/>\n";
        svg += "<line x1=\"" + fmt(x0 + 10) + "\" y1=\"" + fmt(y_of(s.whisker_hi)) + "\" x2=\"" +
               fmt(x1 - 10) + "\" y2=\"" + fmt(y_of(s.whisker_hi)) + "\" stroke=\"black\"/>\n";

        // box and median
        svg += "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y_of(s.q3)) + "\" width=\"" + fmt(box_w) +
               "\" height=\"" + fmt(y_of(s.q1) - y_of(s.q3)) +
               "\" fill=\"#cfe2f3\" stroke=\"black\"/>\n";
        svg += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y_of(s.median)) + "\" x2=\"" + fmt(x1) +
               "\" y2=\"" + fmt(y_of(s.median)) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";

        for (double outlier : s.outliers) {
            svg += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(y_of(outlier)) +
                   "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
        }

        svg += "<text x=\"" + fmt(cx) + "\" y=\"" + fmt(top + plot_h + 25) +
               "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" + name +
               "</text>\n";
    }

    // y-axis ticks at the data fences
    svg += "<line x1=\"" + fmt(margin - 10) + "\" y1=\"" + fmt(top) + "\" x2=\"" +
           fmt(margin - 10) + "\" y2=\"" + fmt(top + plot_h) + "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        double v = lo + (hi - lo) * static_cast<double>(tick) / 4.0;
        svg += "<text x=\"" + fmt(margin - 14) + "\" y=\"" + fmt(y_of(v) + 4) +
               "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" + fmt(v) +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

namespace {

json summary_to_json(const ScoreSummary& s) {
    return {{"median", s.median},   {"mean", s.mean}, {"std", s.std_dev},
            {"min", s.min},         {"max", s.max},   {"q1", s.q1},
            {"q3", s.q3},           {"outliers", s.outliers},
            {"whisker_lo", s.whisker_lo}, {"whisker_hi", s.whisker_hi}};
}

ScoreSummary summary_from_json(const json& j) {
    ScoreSummary s;
    s.median = j.at("median").get<double>();
    s.mean = j.at("mean").get<double>();
    s.std_dev = j.at("std").get<double>();
    s.min = j.at("min").get<double>();
    s.max = j.at("max").get<double>();
    s.q1 = j.at("q1").get<double>();
    s.q3 = j.at("q3").get<double>();
    s.outliers = j.at("outliers").get<std::vector<double>>();
    s.whisker_lo = j.at("whisker_lo").get<double>();
    s.whisker_hi = j.at("whisker_hi").get<double>();
    return s;
}

}  // namespace

std::string emit_report_json(const EvaluationReport& report) {
    json pipeline = json::parse(report.pipeline_json);
    json j{{"format_version", 1},
           {"pipeline", pipeline},
           {"k", report.k},
           {"seed", report.seed},
           {"corpus_digest", report.corpus_digest},
           {"scores",
            {{"f1", report.scores.f1},
             {"precision", report.scores.precision},
             {"recall", report.scores.recall},
             {"accuracy", report.scores.accuracy}}},
           {"summary", summary_to_json(report.summary)}};
    return j.dump(2) + "\n";
}

std::string emit_report_csv(const EvaluationReport& report) {
    std::string csv = "fold,f1,precision,recall,accuracy\n";
    for (std::size_t i = 0; i < report.scores.f1.size(); ++i) {
        csv += std::to_string(i + 1) + ',' + fmt(report.scores.f1[i]) + ',' +
               fmt(report.scores.precision[i]) + ',' + fmt(report.scores.recall[i]) + ',' +
               fmt(report.scores.accuracy[i]) + '\n';
    }
    const auto& s = report.summary;
    csv += "median," + fmt(s.median) + ",,,\n";
    csv += "mean," + fmt(s.mean) + ",,,\n";
    csv += "std," + fmt(s.std_dev) + ",,,\n";
    csv += "min," + fmt(s.min) + ",,,\n";
    csv += "max," + fmt(s.max) + ",,,\n";
    csv += "q1," + fmt(s.q1) + ",,,\n";
    csv += "q3," + fmt(s.q3) + ",,,\n";
    std::string outliers;
    for (std::size_t i = 0; i < s.outliers.size(); ++i) {
        if (i) outliers += '|';
        outliers += fmt(s.outliers[i]);
    }
    csv += "outliers," + outliers + ",,,\n";
    return csv;
}

EvaluationReport parse_report_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error("report: malformed JSON");
    EvaluationReport report;
    report.pipeline_json = j.at("pipeline").dump();
    report.k = j.at("k").get<int>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.corpus_digest = j.at("corpus_digest").get<std::string>();
    report.scores.f1 = j.at("scores").at("f1").get<std::vector<double>>();
    report.scores.precision = j.at("scores").at("precision").get<std::vector<double>>();
    report.scores.recall = j.at("scores").at("recall").get<std::vector<double>>();
    report.scores.accuracy = j.at("scores").at("accuracy").get<std::vector<double>>();
    report.summary = summary_from_json(j.at("summary"));
    return report;
}

}  // namespace probdet
