#include "probdet/pipeline.hpp"

#include "probdet/error.hpp"
#include "probdet/io_util.hpp"
#include "probdet/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>

namespace probdet {

using nlohmann::json;

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::mnb: return "mnb";
        case ModelKind::logreg: return "logreg";
        case ModelKind::sgd: return "sgd";
        case ModelKind::svm: return "svm";
        case ModelKind::random_forest: return "random_forest";
        case ModelKind::gradient_boost: return "gradient_boost";
        case ModelKind::adaboost: return "adaboost";
        case ModelKind::mlp: return "mlp";
        case ModelKind::bigru: return "bigru";
        case ModelKind::bigru_attention: return "bigru_attention";
        case ModelKind::han: return "han";
    }
    throw Error("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
    static const std::vector<std::pair<std::string, ModelKind>> table = {
        {"mnb", ModelKind::mnb},
        {"logreg", ModelKind::logreg},
        {"sgd", ModelKind::sgd},
        {"svm", ModelKind::svm},
        {"random_forest", ModelKind::random_forest},
        {"gradient_boost", ModelKind::gradient_boost},
        {"adaboost", ModelKind::adaboost},
        {"mlp", ModelKind::mlp},
        {"bigru", ModelKind::bigru},
        {"bigru_attention", ModelKind::bigru_attention},
        {"han", ModelKind::han},
    };
    for (const auto& [key, kind] : table) {
        if (key == name) return kind;
    }
    throw Error("unknown model kind '" + name + "'");
}

bool is_neural(ModelKind kind) {
    return kind == ModelKind::mlp || kind == ModelKind::bigru ||
           kind == ModelKind::bigru_attention || kind == ModelKind::han;
}

PipelineSpec PipelineSpec::defaults(ModelKind kind) {
    PipelineSpec spec;
    spec.kind = kind;
    // uni-grams for the forest, uni+bi-grams everywhere else
    spec.ngram = kind == ModelKind::random_forest ? NgramRange{1, 1} : NgramRange{1, 2};
    switch (kind) {
        case ModelKind::mlp: spec.net.kind = Architecture::mlp_precomputed; break;
        case ModelKind::bigru: spec.net.kind = Architecture::bigru; break;
        case ModelKind::bigru_attention: spec.net.kind = Architecture::bigru_attention; break;
        case ModelKind::han: spec.net.kind = Architecture::han; break;
        default: break;
    }
    return spec;
}

namespace {

json hyperparameters_json(const PipelineSpec& spec) {
    switch (spec.kind) {
        case ModelKind::mnb: return {{"alpha", spec.mnb_alpha}};
        case ModelKind::logreg: return {{"C", spec.logreg_C}};
        case ModelKind::svm: return {{"C", spec.svm_C}};
        case ModelKind::sgd:
            return {{"alpha_reg", spec.sgd.alpha_reg},
                    {"l1_ratio", spec.sgd.l1_ratio},
                    {"epochs", spec.sgd.epochs},
                    {"eta0", spec.sgd.eta0}};
        case ModelKind::random_forest:
            return {{"n_trees", spec.forest.n_trees}, {"max_depth", spec.forest.max_depth}};
        case ModelKind::gradient_boost:
            return {{"n_estimators", spec.gb.n_estimators},
                    {"learning_rate", spec.gb.learning_rate},
                    {"max_depth", spec.gb.max_depth}};
        case ModelKind::adaboost:
            return {{"n_estimators", spec.adaboost.n_estimators},
                    {"learning_rate", spec.adaboost.learning_rate}};
        case ModelKind::mlp:
            return {{"hidden1", spec.net.mlp_hidden1},
                    {"hidden2", spec.net.mlp_hidden2},
                    {"dropout", spec.net.dropout_head},
                    {"lr", spec.train.lr},
                    {"batch_size", spec.train.batch_size},
                    {"max_epochs", spec.train.max_epochs},
                    {"patience", spec.train.patience}};
        case ModelKind::bigru:
        case ModelKind::bigru_attention:
            return {{"gru_hidden", spec.net.gru_hidden},
                    {"dense_hidden", spec.net.dense_hidden},
                    {"dropout_embed", spec.net.dropout_embed},
                    {"dropout_head", spec.net.dropout_head},
                    {"max_len", spec.net.max_len},
                    {"lr", spec.train.lr},
                    {"batch_size", spec.train.batch_size},
                    {"max_epochs", spec.train.max_epochs},
                    {"patience", spec.train.patience}};
        case ModelKind::han:
            return {{"word_hidden", spec.net.han_word_hidden},
                    {"sentence_hidden", spec.net.han_sentence_hidden},
                    {"dense_hidden", spec.net.han_dense_hidden},
                    {"dropout_embed", spec.net.dropout_embed},
                    {"dropout_head", spec.net.dropout_head},
                    {"max_len", spec.net.max_len},
                    {"max_sentences", spec.net.max_sentences},
                    {"lr", spec.train.lr},
                    {"batch_size", spec.train.batch_size},
                    {"max_epochs", spec.train.max_epochs},
                    {"patience", spec.train.patience}};
    }
    return json::object();
}

json features_json(const PipelineSpec& spec) {
    if (is_neural(spec.kind)) {
        return {{"embedding", spec.kind == ModelKind::mlp ? "precomputed_768" : "word_vectors"}};
    }
    return {{"ngram_range", {spec.ngram.low, spec.ngram.high}}, {"tfidf", true}};
}

}  // namespace

std::string pipeline_summary_json(const PipelineSpec& spec) {
    json j{{"model", to_string(spec.kind)},
           {"hyperparameters", hyperparameters_json(spec)},
           {"features", features_json(spec)}};
    return j.dump();
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

namespace {

PipelineSpec resolve_seeds(PipelineSpec spec) {
    spec.sgd.seed = derive_seed(spec.seed, 1);
    spec.forest.seed = derive_seed(spec.seed, 2);
    spec.net.seed = derive_seed(spec.seed, 3);
    spec.train.seed = derive_seed(spec.seed, 4);
    return spec;
}

NeuralInput encode_item(const TrainedPipeline& pipe, const LabeledComment& item,
                        const PrecomputedVectors* precomputed) {
    const auto& spec = pipe.spec;
    if (spec.kind == ModelKind::mlp) {
        if (!precomputed) throw Error("mlp pipeline requires precomputed vectors");
        auto it = precomputed->by_id.find(item.id);
        if (it == precomputed->by_id.end()) {
            throw Error("no precomputed vector for id '" + item.id + "'");
        }
        Vec v(PrecomputedVectors::kDim);
        for (int i = 0; i < PrecomputedVectors::kDim; ++i) {
            v(i) = it->second[static_cast<std::size_t>(i)];
        }
        return v;
    }
    if (spec.kind == ModelKind::han) {
        return encode_sentences(item.text, pipe.embeddings, spec.net.max_len,
                                spec.net.max_sentences);
    }
    return encode_sequence(item.text, pipe.embeddings, spec.net.max_len);
}

// Stratified carve-out for early stopping when no validation set is given.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_validation(
    const std::vector<LabeledComment>& items, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < items.size(); ++i) {
        by_class[static_cast<std::size_t>(items[i].label)].push_back(i);
    }
    Rng rng(seed);
    std::vector<std::size_t> train_idx, val_idx;
    for (auto& members : by_class) {
        rng.shuffle(members);
        std::size_t take = members.size() >= 2
                               ? std::max<std::size_t>(1, members.size() / 10)
                               : 0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            (i < take ? val_idx : train_idx).push_back(members[i]);
        }
    }
    if (val_idx.empty() || train_idx.empty()) {
        // corpus too small to carve; validate on the training items
        train_idx.clear();
        val_idx.clear();
        for (std::size_t i = 0; i < items.size(); ++i) {
            train_idx.push_back(i);
            val_idx.push_back(i);
        }
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    return {train_idx, val_idx};
}

}  // namespace

TrainedPipeline train_pipeline(const PipelineSpec& raw_spec,
                               const std::vector<LabeledComment>& items,
                               const std::vector<LabeledComment>* validation,
                               const EmbeddingTable* embeddings,
                               const PrecomputedVectors* precomputed,
                               TrainHistory* history_out) {
    if (items.empty()) throw Error("train_pipeline: no training items");
    TrainedPipeline pipe;
    pipe.spec = resolve_seeds(raw_spec);
    const auto& spec = pipe.spec;

    if (!is_neural(spec.kind)) {
        std::vector<TokenSequence> docs;
        docs.reserve(items.size());
        std::vector<int> y;
        y.reserve(items.size());
        for (const auto& item : items) {
            docs.push_back(tokenize(item.text));
            y.push_back(item.label);
        }
        pipe.vocab = fit_vocabulary(docs, spec.ngram);
        std::vector<SparseVector> counts;
        counts.reserve(docs.size());
        for (const auto& doc : docs) counts.push_back(vectorize_counts(doc, pipe.vocab));
        pipe.tfidf = fit_idf(counts, static_cast<std::int64_t>(counts.size()), pipe.vocab.size());
        std::vector<SparseVector> X;
        X.reserve(counts.size());
        for (const auto& c : counts) X.push_back(transform_tfidf(c, pipe.tfidf));

        switch (spec.kind) {
            case ModelKind::mnb: pipe.classical = fit_mnb(X, y, spec.mnb_alpha); break;
            case ModelKind::logreg: pipe.classical = fit_logreg(X, y, spec.logreg_C); break;
            case ModelKind::sgd: pipe.classical = fit_sgd_linear(X, y, spec.sgd); break;
            case ModelKind::svm: pipe.classical = fit_svm(X, y, spec.svm_C); break;
            case ModelKind::random_forest:
                pipe.classical = fit_random_forest(X, y, spec.forest);
                break;
            case ModelKind::gradient_boost:
                pipe.classical = fit_gradient_boost(X, y, spec.gb);
                break;
            case ModelKind::adaboost:
                pipe.classical = fit_adaboost(X, y, spec.adaboost).first;
                break;
            default: throw Error("unreachable");
        }
        return pipe;
    }

    // neural route
    if (spec.kind == ModelKind::mlp) {
        pipe.spec.net.input_dim = PrecomputedVectors::kDim;
    } else {
        if (!embeddings || embeddings->empty()) {
            throw Error(to_string(spec.kind) + " pipeline requires an embedding table");
        }
        pipe.embeddings = *embeddings;
        pipe.spec.net.input_dim = embeddings->dim;
    }

    NeuralDataset train_set, val_set;
    if (validation) {
        for (const auto& item : items) {
            train_set.inputs.push_back(encode_item(pipe, item, precomputed));
            train_set.labels.push_back(item.label);
        }
        for (const auto& item : *validation) {
            val_set.inputs.push_back(encode_item(pipe, item, precomputed));
            val_set.labels.push_back(item.label);
        }
    } else {
        auto [train_idx, val_idx] = carve_validation(items, derive_seed(spec.seed, 5));
        for (auto i : train_idx) {
            train_set.inputs.push_back(encode_item(pipe, items[i], precomputed));
            train_set.labels.push_back(items[i].label);
        }
        for (auto i : val_idx) {
            val_set.inputs.push_back(encode_item(pipe, items[i], precomputed));
            val_set.labels.push_back(items[i].label);
        }
    }

    pipe.net = build_network(pipe.spec.net);
    TrainHistory history = train_network(*pipe.net, train_set, val_set, pipe.spec.train);
    if (history_out) *history_out = std::move(history);
    return pipe;
}

// ---------------------------------------------------------------------------
// prediction
// ---------------------------------------------------------------------------

SparseVector TrainedPipeline::featurize(const std::string& text) const {
    return transform_tfidf(vectorize_counts(tokenize(text), vocab), tfidf);
}

Prediction TrainedPipeline::predict_text(const std::string& text) const {
    if (!can_score_text()) {
        throw Error("mlp pipeline scores precomputed vectors by id, not raw text");
    }
    if (!is_neural(spec.kind)) {
        SparseVector x = featurize(text);
        if (std::holds_alternative<MnbModel>(classical)) {
            return predict_mnb(std::get<MnbModel>(classical), x);
        }
        if (std::holds_alternative<LinearModel>(classical)) {
            return predict_linear(std::get<LinearModel>(classical), x);
        }
        if (std::holds_alternative<ForestModel>(classical)) {
            return predict_forest(std::get<ForestModel>(classical), x);
        }
        if (std::holds_alternative<AdaBoostModel>(classical)) {
            return predict_adaboost(std::get<AdaBoostModel>(classical), x);
        }
        if (std::holds_alternative<GbModel>(classical)) {
            return predict_gb(std::get<GbModel>(classical), x);
        }
        throw Error("pipeline has no fitted model");
    }

    if (spec.kind == ModelKind::han) {
        SentenceBatch batch = encode_sentences(text, embeddings, spec.net.max_len,
                                               spec.net.max_sentences);
        bool usable = std::any_of(batch.begin(), batch.end(),
                                  [](const EncodedSequence& s) { return s.true_count() > 0; });
        if (!usable) return {0, 0.5};
        return predict_network(*net, batch);
    }
    EncodedSequence seq = encode_sequence(text, embeddings, spec.net.max_len);
    if (seq.true_count() == 0) return {0, 0.5};
    return predict_network(*net, seq);
}

Prediction TrainedPipeline::predict_comment(const LabeledComment& item,
                                            const PrecomputedVectors* precomputed) const {
    if (spec.kind == ModelKind::mlp) {
        return predict_network(*net, encode_item(*this, item, precomputed));
    }
    return predict_text(item.text);
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {

json doubles_to_json(const std::vector<double>& values) {
    json arr = json::array();
    for (double v : values) arr.push_back(double_to_string(v));
    return arr;
}

std::vector<double> doubles_from_json(const json& arr) {
    std::vector<double> values;
    values.reserve(arr.size());
    for (const auto& s : arr) values.push_back(string_to_double(s.get<std::string>()));
    return values;
}

json mat_to_json(const Mat& m) {
    json data = json::array();
    for (Eigen::Index i = 0; i < m.size(); ++i) data.push_back(double_to_string(m.data()[i]));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Mat mat_from_json(const json& j) {
    Mat m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != m.size()) {
        throw Error("model file: tensor size mismatch");
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = string_to_double(data[static_cast<std::size_t>(i)].get<std::string>());
    }
    return m;
}

json tree_to_json(const TreeNode& node) {
    if (node.is_leaf()) {
        return {{"leaf_value", double_to_string(node.value)},
                {"counts", {double_to_string(node.counts[0]), double_to_string(node.counts[1])}}};
    }
    return {{"feature", node.feature},
            {"threshold", double_to_string(node.threshold)},
            {"left", tree_to_json(*node.left)},
            {"right", tree_to_json(*node.right)}};
}

std::unique_ptr<TreeNode> tree_from_json(const json& j) {
    auto node = std::make_unique<TreeNode>();
    if (j.contains("leaf_value")) {
        node->value = string_to_double(j.at("leaf_value").get<std::string>());
        node->counts[0] = string_to_double(j.at("counts")[0].get<std::string>());
        node->counts[1] = string_to_double(j.at("counts")[1].get<std::string>());
        return node;
    }
    node->feature = j.at("feature").get<std::int32_t>();
    node->threshold = string_to_double(j.at("threshold").get<std::string>());
    node->left = tree_from_json(j.at("left"));
    node->right = tree_from_json(j.at("right"));
    return node;
}

json vocabulary_to_json(const Vocabulary& vocab, const TfidfModel& tfidf) {
    return {{"terms", vocab.terms},
            {"idf", doubles_to_json(tfidf.idf)},
            {"document_count", tfidf.document_count},
            {"ngram_range", {vocab.ngram_range.low, vocab.ngram_range.high}}};
}

json network_spec_to_json(const NetworkSpec& s) {
    return {{"kind", static_cast<int>(s.kind)},
            {"input_dim", s.input_dim},
            {"mlp_hidden1", s.mlp_hidden1},
            {"mlp_hidden2", s.mlp_hidden2},
            {"gru_hidden", s.gru_hidden},
            {"dense_hidden", s.dense_hidden},
            {"han_word_hidden", s.han_word_hidden},
            {"han_sentence_hidden", s.han_sentence_hidden},
            {"han_dense_hidden", s.han_dense_hidden},
            {"attention_dim", s.attention_dim},
            {"dropout_embed", double_to_string(s.dropout_embed)},
            {"dropout_head", double_to_string(s.dropout_head)},
            {"max_len", s.max_len},
            {"max_sentences", s.max_sentences},
            {"seed", s.seed}};
}

NetworkSpec network_spec_from_json(const json& j) {
    NetworkSpec s;
    s.kind = static_cast<Architecture>(j.at("kind").get<int>());
    s.input_dim = j.at("input_dim").get<int>();
    s.mlp_hidden1 = j.at("mlp_hidden1").get<int>();
    s.mlp_hidden2 = j.at("mlp_hidden2").get<int>();
    s.gru_hidden = j.at("gru_hidden").get<int>();
    s.dense_hidden = j.at("dense_hidden").get<int>();
    s.han_word_hidden = j.at("han_word_hidden").get<int>();
    s.han_sentence_hidden = j.at("han_sentence_hidden").get<int>();
    s.han_dense_hidden = j.at("han_dense_hidden").get<int>();
    s.attention_dim = j.at("attention_dim").get<int>();
    s.dropout_embed = string_to_double(j.at("dropout_embed").get<std::string>());
    s.dropout_head = string_to_double(j.at("dropout_head").get<std::string>());
    s.max_len = j.at("max_len").get<int>();
    s.max_sentences = j.at("max_sentences").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

}  // namespace

std::string TrainedPipeline::to_json_string() const {
    json j;
    j["format_version"] = 1;
    j["kind"] = to_string(spec.kind);
    j["seed"] = spec.seed;
    j["hyperparameters"] = hyperparameters_json(spec);
    j["features"] = features_json(spec);

    if (!is_neural(spec.kind)) {
        j["vocabulary"] = vocabulary_to_json(vocab, tfidf);
        json m;
        if (const auto* mnb = std::get_if<MnbModel>(&classical)) {
            m = {{"log_prior",
                  {double_to_string(mnb->log_prior[0]), double_to_string(mnb->log_prior[1])}},
                 {"log_likelihood",
                  {doubles_to_json(mnb->log_likelihood[0]), doubles_to_json(mnb->log_likelihood[1])}},
                 {"smoothing", double_to_string(mnb->smoothing)},
                 {"dim", mnb->dim}};
        } else if (const auto* lin = std::get_if<LinearModel>(&classical)) {
            m = {{"weights", doubles_to_json(lin->weights)},
                 {"bias", double_to_string(lin->bias)},
                 {"loss", lin->loss == LossKind::logistic ? "logistic" : "hinge"},
                 {"C", double_to_string(lin->C)},
                 {"alpha_reg", double_to_string(lin->alpha_reg)},
                 {"l1_ratio", double_to_string(lin->l1_ratio)}};
        } else if (const auto* forest = std::get_if<ForestModel>(&classical)) {
            json trees = json::array();
            for (const auto& t : forest->trees) trees.push_back(tree_to_json(*t));
            m = {{"trees", std::move(trees)},
                 {"n_trees", forest->cfg.n_trees},
                 {"max_depth", forest->cfg.max_depth},
                 {"seed", forest->cfg.seed},
                 {"dim", forest->dim}};
        } else if (const auto* ada = std::get_if<AdaBoostModel>(&classical)) {
            json stumps = json::array();
            for (const auto& t : ada->stumps) stumps.push_back(tree_to_json(*t));
            m = {{"stumps", std::move(stumps)},
                 {"alphas", doubles_to_json(ada->alphas)},
                 {"learning_rate", double_to_string(ada->cfg.learning_rate)},
                 {"n_estimators", ada->cfg.n_estimators},
                 {"dim", ada->dim}};
        } else if (const auto* gb = std::get_if<GbModel>(&classical)) {
            json stages = json::array();
            for (const auto& t : gb->stages) stages.push_back(tree_to_json(*t));
            m = {{"stages", std::move(stages)},
                 {"f0", double_to_string(gb->f0)},
                 {"learning_rate", double_to_string(gb->cfg.learning_rate)},
                 {"n_estimators", gb->cfg.n_estimators},
                 {"max_depth", gb->cfg.max_depth},
                 {"dim", gb->dim}};
        } else {
            throw Error("cannot serialize an unfitted pipeline");
        }
        j["model"] = std::move(m);
        return j.dump();
    }

    if (!net) throw Error("cannot serialize an unfitted pipeline");
    json params = json::object();
    for (auto& block : const_cast<TrainedPipeline*>(this)->net->param_blocks()) {
        params[block.name] = mat_to_json(*block.value);
    }
    j["spec"] = network_spec_to_json(net->spec());
    j["parameters"] = std::move(params);
    if (spec.kind != ModelKind::mlp) {
        json vectors = json::object();
        for (const auto& [token, values] : embeddings.vectors) {
            vectors[token] = doubles_to_json(values);
        }
        j["embeddings"] = {{"dim", embeddings.dim}, {"vectors", std::move(vectors)}};
    }
    return j.dump();
}

TrainedPipeline TrainedPipeline::from_json_string(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error("model file: malformed JSON");
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
        throw Error("model file: unsupported format version");
    }

    TrainedPipeline pipe;
    pipe.spec = PipelineSpec::defaults(model_kind_from_string(j.at("kind").get<std::string>()));
    pipe.spec.seed = j.value("seed", std::uint64_t{0});
    const json& hp = j.at("hyperparameters");
    if (pipe.spec.kind == ModelKind::sgd) {
        pipe.spec.sgd.epochs = hp.value("epochs", pipe.spec.sgd.epochs);
        pipe.spec.sgd.eta0 = hp.value("eta0", pipe.spec.sgd.eta0);
    }
    if (is_neural(pipe.spec.kind)) {
        pipe.spec.train.lr = hp.value("lr", pipe.spec.train.lr);
        pipe.spec.train.batch_size = hp.value("batch_size", pipe.spec.train.batch_size);
        pipe.spec.train.max_epochs = hp.value("max_epochs", pipe.spec.train.max_epochs);
        pipe.spec.train.patience = hp.value("patience", pipe.spec.train.patience);
    }

    if (!is_neural(pipe.spec.kind)) {
        const json& v = j.at("vocabulary");
        pipe.vocab.terms = v.at("terms").get<std::vector<std::string>>();
        pipe.vocab.ngram_range = {v.at("ngram_range")[0].get<int>(),
                                  v.at("ngram_range")[1].get<int>()};
        for (std::int32_t i = 0; i < pipe.vocab.size(); ++i) {
            pipe.vocab.index.emplace(pipe.vocab.terms[static_cast<std::size_t>(i)], i);
        }
        pipe.spec.ngram = pipe.vocab.ngram_range;
        pipe.tfidf.idf = doubles_from_json(v.at("idf"));
        pipe.tfidf.document_count = v.at("document_count").get<std::int64_t>();

        const json& m = j.at("model");
        switch (pipe.spec.kind) {
            case ModelKind::mnb: {
                MnbModel mnb;
                mnb.log_prior[0] = string_to_double(m.at("log_prior")[0].get<std::string>());
                mnb.log_prior[1] = string_to_double(m.at("log_prior")[1].get<std::string>());
                mnb.log_likelihood[0] = doubles_from_json(m.at("log_likelihood")[0]);
                mnb.log_likelihood[1] = doubles_from_json(m.at("log_likelihood")[1]);
                mnb.smoothing = string_to_double(m.at("smoothing").get<std::string>());
                mnb.dim = m.at("dim").get<std::int32_t>();
                pipe.spec.mnb_alpha = mnb.smoothing;
                pipe.classical = std::move(mnb);
                break;
            }
            case ModelKind::logreg:
            case ModelKind::sgd:
            case ModelKind::svm: {
                LinearModel lin;
                lin.weights = doubles_from_json(m.at("weights"));
                lin.bias = string_to_double(m.at("bias").get<std::string>());
                lin.loss = m.at("loss").get<std::string>() == "logistic" ? LossKind::logistic
                                                                         : LossKind::hinge;
                lin.C = string_to_double(m.at("C").get<std::string>());
                lin.alpha_reg = string_to_double(m.at("alpha_reg").get<std::string>());
                lin.l1_ratio = string_to_double(m.at("l1_ratio").get<std::string>());
                if (pipe.spec.kind == ModelKind::logreg) pipe.spec.logreg_C = lin.C;
                if (pipe.spec.kind == ModelKind::svm) pipe.spec.svm_C = lin.C;
                if (pipe.spec.kind == ModelKind::sgd) {
                    pipe.spec.sgd.alpha_reg = lin.alpha_reg;
                    pipe.spec.sgd.l1_ratio = lin.l1_ratio;
                }
                pipe.classical = std::move(lin);
                break;
            }
            case ModelKind::random_forest: {
                ForestModel forest;
                forest.cfg.n_trees = m.at("n_trees").get<int>();
                forest.cfg.max_depth = m.at("max_depth").get<int>();
                forest.cfg.seed = m.at("seed").get<std::uint64_t>();
                forest.dim = m.at("dim").get<std::int32_t>();
                for (const auto& t : m.at("trees")) forest.trees.push_back(tree_from_json(t));
                pipe.spec.forest = forest.cfg;
                pipe.classical = std::move(forest);
                break;
            }
            case ModelKind::adaboost: {
                AdaBoostModel ada;
                ada.cfg.n_estimators = m.at("n_estimators").get<int>();
                ada.cfg.learning_rate = string_to_double(m.at("learning_rate").get<std::string>());
                ada.dim = m.at("dim").get<std::int32_t>();
                ada.alphas = doubles_from_json(m.at("alphas"));
                for (const auto& t : m.at("stumps")) ada.stumps.push_back(tree_from_json(t));
                pipe.spec.adaboost = ada.cfg;
                pipe.classical = std::move(ada);
                break;
            }
            case ModelKind::gradient_boost: {
                GbModel gb;
                gb.f0 = string_to_double(m.at("f0").get<std::string>());
                gb.cfg.n_estimators = m.at("n_estimators").get<int>();
                gb.cfg.learning_rate = string_to_double(m.at("learning_rate").get<std::string>());
                gb.cfg.max_depth = m.at("max_depth").get<int>();
                gb.dim = m.at("dim").get<std::int32_t>();
                for (const auto& t : m.at("stages")) gb.stages.push_back(tree_from_json(t));
                pipe.spec.gb = gb.cfg;
                pipe.classical = std::move(gb);
                break;
            }
            default: throw Error("unreachable");
        }
        (void)hp;
        return pipe;
    }

    pipe.spec.net = network_spec_from_json(j.at("spec"));
    pipe.net = build_network(pipe.spec.net);
    const json& params = j.at("parameters");
    for (auto& block : pipe.net->param_blocks()) {
        if (!params.contains(block.name)) {
            throw Error("model file: missing parameter block '" + block.name + "'");
        }
        Mat restored = mat_from_json(params.at(block.name));
        if (restored.rows() != block.value->rows() || restored.cols() != block.value->cols()) {
            throw Error("model file: shape mismatch in block '" + block.name + "'");
        }
        *block.value = std::move(restored);
    }
    if (pipe.spec.kind != ModelKind::mlp) {
        const json& emb = j.at("embeddings");
        pipe.embeddings.dim = emb.at("dim").get<int>();
        for (const auto& [token, values] : emb.at("vectors").items()) {
            pipe.embeddings.vectors.emplace(token, doubles_from_json(values));
        }
    }
    return pipe;
}

void TrainedPipeline::save(const std::filesystem::path& path) const {
    write_file_atomic(path, to_json_string());
}

TrainedPipeline TrainedPipeline::load(const std::filesystem::path& path) {
    return from_json_string(read_file(path));
}

}  // namespace probdet
