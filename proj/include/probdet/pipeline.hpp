#pragma once

#include "probdet/corpus.hpp"
#include "probdet/embeddings.hpp"
#include "probdet/linear_models.hpp"
#include "probdet/neural/network.hpp"
#include "probdet/text_features.hpp"
#include "probdet/tree_ensembles.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>

namespace probdet {

enum class ModelKind {
    mnb,
    logreg,
    sgd,
    svm,
    random_forest,
    gradient_boost,
    adaboost,
    mlp,
    bigru,
    bigru_attention,
    han,
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
bool is_neural(ModelKind kind);

// Full configuration of one experiment: feature setup plus the
// hyperparameters of the chosen model. defaults(kind) yields the tuned
// configuration reported for that classifier (bi-gram features everywhere
// except the random forest, which uses uni-grams).
struct PipelineSpec {
    ModelKind kind = ModelKind::logreg;
    NgramRange ngram{1, 2};
    double mnb_alpha = 1.0;
    double logreg_C = 10.0;
    double svm_C = 1.0;
    SgdConfig sgd{};
    ForestConfig forest{};
    AdaBoostConfig adaboost{};
    GbConfig gb{};
    NetworkSpec net{};
    TrainConfig train{};
    std::uint64_t seed = 0;

    static PipelineSpec defaults(ModelKind kind);
};

// {"model", "hyperparameters", "features"} description used in model files
// and evaluation reports.
std::string pipeline_summary_json(const PipelineSpec& spec);

class TrainedPipeline {
public:
    PipelineSpec spec;

    // classical route
    Vocabulary vocab;
    TfidfModel tfidf;
    std::variant<std::monostate, MnbModel, LinearModel, ForestModel, AdaBoostModel, GbModel>
        classical;

    // neural route
    std::unique_ptr<Network> net;
    EmbeddingTable embeddings;  // kept with the model so files are self-contained

    bool can_score_text() const { return spec.kind != ModelKind::mlp; }

    SparseVector featurize(const std::string& text) const;

    // Scores raw text. Sequence models receiving input with no usable token
    // score 0.5 (label 0). The mlp kind has no text path and throws.
    Prediction predict_text(const std::string& text) const;

    // Scores one comment; the mlp kind looks its vector up by id.
    Prediction predict_comment(const LabeledComment& item,
                               const PrecomputedVectors* precomputed) const;

    std::string to_json_string() const;
    static TrainedPipeline from_json_string(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static TrainedPipeline load(const std::filesystem::path& path);
};

// Fits the full pipeline on `items`. Neural kinds early-stop on
// `validation` when given, otherwise on a seeded stratified 10% carve-out
// of the training items. Sequence kinds require `embeddings`; the mlp kind
// requires `precomputed`. history_out, when given, receives the per-epoch
// training record of neural kinds.
TrainedPipeline train_pipeline(const PipelineSpec& spec, const std::vector<LabeledComment>& items,
                               const std::vector<LabeledComment>* validation = nullptr,
                               const EmbeddingTable* embeddings = nullptr,
                               const PrecomputedVectors* precomputed = nullptr,
                               TrainHistory* history_out = nullptr);

}  // namespace probdet
