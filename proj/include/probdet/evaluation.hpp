#pragma once

#include "probdet/corpus.hpp"
#include "probdet/pipeline.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace probdet {

struct ConfusionMatrix {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
};

struct Metrics {
    ConfusionMatrix confusion;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
};

// precision = tp/(tp+fp), recall = tp/(tp+fn), f1 = 2PR/(P+R); each is 0
// when its denominator is 0.
Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& gold);

struct FoldScores {
    std::vector<double> f1, precision, recall, accuracy;
};

// Called after each fold with the pipeline fitted on the other k-1 folds.
using FoldObserver = std::function<void(int fold, const TrainedPipeline&)>;

// Per fold: fit vocabulary, idf and model on the other folds only, then
// score the held-out fold. A training portion with a single class raises an
// error naming the fold.
FoldScores cross_validate(const PipelineSpec& spec, const Corpus& corpus, const FoldPlan& plan,
                          const EmbeddingTable* embeddings = nullptr,
                          const PrecomputedVectors* precomputed = nullptr,
                          const FoldObserver& observer = nullptr);

struct ScoreSummary {
    double median = 0.0;
    double mean = 0.0;
    double std_dev = 0.0;  // sample standard deviation (n-1)
    double min = 0.0;
    double max = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    std::vector<double> outliers;    // outside [q1 - 1.5 IQR, q3 + 1.5 IQR]
    double whisker_lo = 0.0;         // most extreme non-outlier points
    double whisker_hi = 0.0;
};

// Quartiles by linear interpolation between order statistics.
ScoreSummary summarize_scores(const std::vector<double>& scores);

// One box per pipeline: q1..q3 box, median line, whiskers to the most
// extreme non-outliers, one circle per outlier. Deterministic layout.
std::string render_boxplot(const std::vector<std::pair<std::string, ScoreSummary>>& summaries);

struct EvaluationReport {
    std::string pipeline_json;  // {"model", "hyperparameters", "features"}
    int k = 0;
    std::uint64_t seed = 0;
    std::string corpus_digest;
    FoldScores scores;
    ScoreSummary summary;  // of the f1 scores
};

EvaluationReport evaluate_cv(const PipelineSpec& spec, const Corpus& corpus, int k,
                             std::uint64_t seed, const EmbeddingTable* embeddings = nullptr,
                             const PrecomputedVectors* precomputed = nullptr);

std::string emit_report_json(const EvaluationReport& report);
std::string emit_report_csv(const EvaluationReport& report);
EvaluationReport parse_report_json(const std::string& text);

}  // namespace probdet
