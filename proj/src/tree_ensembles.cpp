#include "probdet/tree_ensembles.hpp"

#include "probdet/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace probdet {

double gini(const std::vector<double>& class_counts) {
    double total = 0.0;
    for (double c : class_counts) {
        if (c < 0) throw Error("gini: counts must be non-negative");
        total += c;
    }
    if (total <= 0) throw Error("gini: total count must be positive");
    double acc = 1.0;
    for (double c : class_counts) {
        double p = c / total;
        acc -= p * p;
    }
    return acc;
}

namespace {

// Aggregate statistics for a sample subset. Classification uses (w, a) with
// a = weighted class-1 count; regression uses (w, a, b) with a = sum of
// weighted residuals and b = sum of weighted hessians.
struct Stats {
    double w = 0.0;
    double a = 0.0;
    double b = 0.0;

    void add(const Stats& o) {
        w += o.w;
        a += o.a;
        b += o.b;
    }
    void sub(const Stats& o) {
        w -= o.w;
        a -= o.a;
        b -= o.b;
    }
};

enum class TreeMode { classification, regression };

// Weighted impurity sum: lower is purer. Classification uses the Gini form
// W - (w0^2 + w1^2)/W; regression uses -a^2/w (sum-of-squares proxy, the
// constant term cancels in decreases).
double impurity_sum(TreeMode mode, const Stats& s) {
    if (s.w <= 0) return 0.0;
    if (mode == TreeMode::classification) {
        double w1 = s.a, w0 = s.w - s.a;
        return s.w - (w0 * w0 + w1 * w1) / s.w;
    }
    return -(s.a * s.a) / s.w;
}

struct SplitChoice {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double decrease = 0.0;
};

struct ColumnEntry {
    std::int32_t row;
    double value;
};

class TreeBuilder {
public:
    TreeBuilder(const std::vector<SparseVector>& X, TreeMode mode, std::vector<Stats> per_sample,
                int max_depth, int max_features, Rng& rng)
        : X_(X),
          mode_(mode),
          per_sample_(std::move(per_sample)),
          max_depth_(max_depth),
          max_features_(max_features),
          rng_(rng),
          dim_(X.empty() ? 0 : X[0].dim),
          stamp_(X.size(), 0) {
        columns_.resize(static_cast<std::size_t>(dim_));
        for (std::size_t i = 0; i < X_.size(); ++i) {
            if (per_sample_[i].w <= 0) continue;  // zero-weight rows never enter the tree
            for (const auto& [idx, value] : X_[i].entries) {
                if (value != 0.0) {
                    columns_[static_cast<std::size_t>(idx)].push_back(
                        {static_cast<std::int32_t>(i), value});
                }
            }
        }
        feature_pool_.resize(static_cast<std::size_t>(dim_));
        std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
    }

    std::unique_ptr<TreeNode> build() {
        std::vector<std::int32_t> rows;
        for (std::size_t i = 0; i < X_.size(); ++i) {
            if (per_sample_[i].w > 0) rows.push_back(static_cast<std::int32_t>(i));
        }
        Stats total;
        for (auto r : rows) total.add(per_sample_[static_cast<std::size_t>(r)]);
        return grow(rows, total, 0);
    }

private:
    std::unique_ptr<TreeNode> grow(std::vector<std::int32_t>& rows, const Stats& stats,
                                   int depth) {
        auto node = std::make_unique<TreeNode>();
        bool stop = depth >= max_depth_ || rows.size() < 2 || pure(stats);
        SplitChoice best;
        if (!stop) best = find_best_split(rows, stats);
        if (stop || best.feature < 0) {
            finish_leaf(*node, stats);
            return node;
        }

        node->feature = best.feature;
        node->threshold = best.threshold;
        std::vector<std::int32_t> left_rows, right_rows;
        Stats left_stats;
        for (auto r : rows) {
            double v = X_[static_cast<std::size_t>(r)].value_at(best.feature);
            if (v <= best.threshold) {
                left_rows.push_back(r);
                left_stats.add(per_sample_[static_cast<std::size_t>(r)]);
            } else {
                right_rows.push_back(r);
            }
        }
        Stats right_stats = stats;
        right_stats.sub(left_stats);
        rows.clear();
        rows.shrink_to_fit();
        node->left = grow(left_rows, left_stats, depth + 1);
        node->right = grow(right_rows, right_stats, depth + 1);
        return node;
    }

    bool pure(const Stats& s) const {
        if (mode_ == TreeMode::classification) {
            return s.a <= 1e-12 || s.w - s.a <= 1e-12;
        }
        return false;  // regression relies on the zero-decrease stop
    }

    void finish_leaf(TreeNode& node, const Stats& stats) const {
        if (mode_ == TreeMode::classification) {
            node.counts = {stats.w - stats.a, stats.a};
            node.value = stats.w > 0 ? stats.a / stats.w : 0.0;
        } else {
            // Newton step for logistic loss
            node.counts = {stats.w, 0.0};
            node.value = stats.a / std::max(stats.b, 1e-12);
        }
    }

    SplitChoice find_best_split(const std::vector<std::int32_t>& rows, const Stats& total) {
        SplitChoice best;
        const double parent_impurity = impurity_sum(mode_, total);

        auto consider = [&](std::int32_t feature) {
            gather(feature, rows, total);
            if (buckets_.size() < 2) return;
            Stats left;
            for (std::size_t i = 0; i + 1 < buckets_.size(); ++i) {
                left.add(buckets_[i].second);
                Stats right = total;
                right.sub(left);
                if (left.w <= 0 || right.w <= 0) continue;
                double decrease = parent_impurity - impurity_sum(mode_, left) -
                                  impurity_sum(mode_, right);
                if (decrease > best.decrease && decrease > 1e-12) {
                    best.feature = feature;
                    best.threshold = 0.5 * (buckets_[i].first + buckets_[i + 1].first);
                    best.decrease = decrease;
                }
            }
        };

        if (max_features_ <= 0 || max_features_ >= dim_) {
            for (std::int32_t j = 0; j < dim_; ++j) consider(j);
        } else {
            // partial Fisher-Yates over the persistent permutation
            auto m = static_cast<std::size_t>(max_features_);
            for (std::size_t i = 0; i < m; ++i) {
                std::size_t j = i + static_cast<std::size_t>(
                                        rng_.below(static_cast<std::uint64_t>(dim_) - i));
                std::swap(feature_pool_[i], feature_pool_[j]);
            }
            std::vector<std::int32_t> sampled(feature_pool_.begin(),
                                              feature_pool_.begin() + static_cast<std::ptrdiff_t>(m));
            std::sort(sampled.begin(), sampled.end());
            for (auto j : sampled) consider(j);
        }
        return best;
    }

    // Collects the node's distinct values for `feature` (absent entries are
    // zeros) as sorted (value, stats) buckets.
    void gather(std::int32_t feature, const std::vector<std::int32_t>& rows, const Stats& total) {
        items_.clear();
        const auto& column = columns_[static_cast<std::size_t>(feature)];
        // Scan whichever side is cheaper: the full column with a membership
        // stamp, or the node rows with per-row binary search.
        if (column.size() <= rows.size() * 4) {
            ++generation_;
            for (auto r : rows) stamp_[static_cast<std::size_t>(r)] = generation_;
            for (const auto& entry : column) {
                if (stamp_[static_cast<std::size_t>(entry.row)] == generation_) {
                    items_.emplace_back(entry.value, per_sample_[static_cast<std::size_t>(entry.row)]);
                }
            }
        } else {
            for (auto r : rows) {
                double v = X_[static_cast<std::size_t>(r)].value_at(feature);
                if (v != 0.0) items_.emplace_back(v, per_sample_[static_cast<std::size_t>(r)]);
            }
        }

        std::sort(items_.begin(), items_.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        Stats nonzero;
        for (const auto& [v, s] : items_) nonzero.add(s);
        Stats zero = total;
        zero.sub(nonzero);

        buckets_.clear();
        // The zero value is observed iff some node row has no entry for this
        // feature; an integer count decides that, not weight arithmetic.
        bool zero_emitted = items_.size() >= rows.size();
        auto emit_zero_before = [&](double next_value) {
            if (!zero_emitted && 0.0 < next_value) {
                buckets_.emplace_back(0.0, zero);
                zero_emitted = true;
            }
        };
        for (const auto& [v, s] : items_) {
            emit_zero_before(v);
            if (!buckets_.empty() && buckets_.back().first == v) {
                buckets_.back().second.add(s);
            } else {
                buckets_.emplace_back(v, s);
            }
        }
        if (!zero_emitted) buckets_.emplace_back(0.0, zero);
    }

    const std::vector<SparseVector>& X_;
    TreeMode mode_;
    std::vector<Stats> per_sample_;
    int max_depth_;
    int max_features_;
    Rng& rng_;
    std::int32_t dim_;
    std::vector<std::vector<ColumnEntry>> columns_;
    std::vector<std::int32_t> feature_pool_;
    std::vector<std::int32_t> stamp_;
    std::int32_t generation_ = 0;
    std::vector<std::pair<double, Stats>> items_;
    std::vector<std::pair<double, Stats>> buckets_;
};

std::vector<Stats> classification_stats(const std::vector<int>& y,
                                        const std::vector<double>* weights) {
    std::vector<Stats> stats(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        double w = weights ? (*weights)[i] : 1.0;
        stats[i].w = w;
        stats[i].a = y[i] == 1 ? w : 0.0;
    }
    return stats;
}

}  // namespace

std::unique_ptr<TreeNode> fit_tree(const std::vector<SparseVector>& X, const std::vector<int>& y,
                                   int max_depth, int max_features, Rng& rng) {
    return fit_tree_weighted(X, y, {}, max_depth, max_features, rng);
}

std::unique_ptr<TreeNode> fit_tree_weighted(const std::vector<SparseVector>& X,
                                            const std::vector<int>& y,
                                            const std::vector<double>& sample_weights,
                                            int max_depth, int max_features, Rng& rng) {
    if (X.empty()) throw Error("fit_tree requires at least one sample");
    if (X.size() != y.size()) throw Error("fit_tree: X/y length mismatch");
    const std::vector<double>* w = sample_weights.empty() ? nullptr : &sample_weights;
    TreeBuilder builder(X, TreeMode::classification, classification_stats(y, w), max_depth,
                        max_features, rng);
    return builder.build();
}

int tree_predict_label(const TreeNode& root, const SparseVector& x) {
    const TreeNode* node = &root;
    while (!node->is_leaf()) {
        node = x.value_at(node->feature) <= node->threshold ? node->left.get()
                                                            : node->right.get();
    }
    return node->counts[1] > node->counts[0] ? 1 : 0;
}

double tree_predict_value(const TreeNode& root, const SparseVector& x) {
    const TreeNode* node = &root;
    while (!node->is_leaf()) {
        node = x.value_at(node->feature) <= node->threshold ? node->left.get()
                                                            : node->right.get();
    }
    return node->value;
}

ForestModel fit_random_forest(const std::vector<SparseVector>& X, const std::vector<int>& y,
                              const ForestConfig& cfg) {
    if (cfg.n_trees < 1) throw Error("fit_random_forest requires n_trees >= 1");
    bool saw[2] = {false, false};
    for (int label : y) saw[static_cast<std::size_t>(label)] = true;
    if (!saw[0] || !saw[1]) throw Error("training data must contain both classes");

    const auto n = X.size();
    const auto d = X[0].dim;
    const int max_features = std::max(1, static_cast<int>(std::floor(std::sqrt(
                                             static_cast<double>(d)))));

    ForestModel model;
    model.cfg = cfg;
    model.dim = d;
    model.trees.reserve(static_cast<std::size_t>(cfg.n_trees));
    // One derived stream per tree, so any parallel build schedule would
    // produce the same forest as this serial loop.
    for (int t = 0; t < cfg.n_trees; ++t) {
        Rng tree_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
        std::vector<double> weights(n, 1.0);
        if (cfg.bootstrap) {
            std::fill(weights.begin(), weights.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                weights[static_cast<std::size_t>(tree_rng.below(n))] += 1.0;
            }
        }
        model.trees.push_back(
            fit_tree_weighted(X, y, weights, cfg.max_depth, max_features, tree_rng));
    }
    return model;
}

std::pair<AdaBoostModel, BoostState> fit_adaboost(const std::vector<SparseVector>& X,
                                                  const std::vector<int>& y,
                                                  const AdaBoostConfig& cfg) {
    if (cfg.n_estimators < 1) throw Error("fit_adaboost requires n_estimators >= 1");
    bool saw[2] = {false, false};
    for (int label : y) saw[static_cast<std::size_t>(label)] = true;
    if (!saw[0] || !saw[1]) throw Error("training data must contain both classes");

    const auto n = X.size();
    BoostState state;
    state.learning_rate = cfg.learning_rate;
    state.sample_weights.assign(n, 1.0 / static_cast<double>(n));

    AdaBoostModel model;
    model.cfg = cfg;
    model.dim = X[0].dim;
    Rng rng(0);  // stumps search every feature; the stream is never consumed

    for (int m = 0; m < cfg.n_estimators; ++m) {
        auto stump = fit_tree_weighted(X, y, state.sample_weights, 1, 0, rng);
        double err = 0.0;
        std::vector<bool> miss(n);
        for (std::size_t i = 0; i < n; ++i) {
            miss[i] = tree_predict_label(*stump, X[i]) != y[i];
            if (miss[i]) err += state.sample_weights[i];
        }
        if (err >= 0.5 && !model.stumps.empty()) break;

        double floored = std::clamp(err, 1e-10, 1.0 - 1e-10);
        double alpha = cfg.learning_rate * std::log((1.0 - floored) / floored);
        model.stumps.push_back(std::move(stump));
        model.alphas.push_back(alpha);
        state.stage_alphas.push_back(alpha);

        if (err < 1e-10 || err >= 0.5) break;  // perfect or degenerate stump

        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (miss[i]) state.sample_weights[i] *= std::exp(alpha);
            total += state.sample_weights[i];
        }
        for (auto& w : state.sample_weights) w /= total;
    }
    return {std::move(model), std::move(state)};
}

GbModel fit_gradient_boost(const std::vector<SparseVector>& X, const std::vector<int>& y,
                           const GbConfig& cfg) {
    if (cfg.n_estimators < 1) throw Error("fit_gradient_boost requires n_estimators >= 1");
    const auto n = X.size();
    double positives = 0.0;
    for (int label : y) positives += label;
    if (positives == 0 || positives == static_cast<double>(n)) {
        throw Error("training data must contain both classes");
    }

    GbModel model;
    model.cfg = cfg;
    model.dim = X[0].dim;
    double p_bar = positives / static_cast<double>(n);
    model.f0 = std::log(p_bar / (1.0 - p_bar));

    std::vector<double> score(n, model.f0);
    Rng rng(0);  // every feature considered; stream unused
    for (int m = 0; m < cfg.n_estimators; ++m) {
        std::vector<Stats> stats(n);
        for (std::size_t i = 0; i < n; ++i) {
            double p = 1.0 / (1.0 + std::exp(-score[i]));
            stats[i].w = 1.0;
            stats[i].a = static_cast<double>(y[i]) - p;  // residual
            stats[i].b = std::max(p * (1.0 - p), 1e-12);
        }
        TreeBuilder builder(X, TreeMode::regression, std::move(stats), cfg.max_depth, 0, rng);
        auto stage = builder.build();
        for (std::size_t i = 0; i < n; ++i) {
            score[i] += cfg.learning_rate * tree_predict_value(*stage, X[i]);
        }
        model.stages.push_back(std::move(stage));
    }
    return model;
}

double gb_decision(const GbModel& model, const SparseVector& x) {
    double f = model.f0;
    for (const auto& stage : model.stages) {
        f += model.cfg.learning_rate * tree_predict_value(*stage, x);
    }
    return f;
}

Prediction predict_forest(const ForestModel& model, const SparseVector& x) {
    if (x.dim != model.dim) throw Error("predict: dimension mismatch");
    double votes = 0.0;
    for (const auto& tree : model.trees) votes += tree_predict_label(*tree, x);
    double share = votes / static_cast<double>(model.trees.size());
    return {share > 0.5 ? 1 : 0, share};
}

Prediction predict_adaboost(const AdaBoostModel& model, const SparseVector& x) {
    if (x.dim != model.dim) throw Error("predict: dimension mismatch");
    double margin = 0.0, total = 0.0;
    for (std::size_t m = 0; m < model.stumps.size(); ++m) {
        int h = tree_predict_label(*model.stumps[m], x);
        margin += model.alphas[m] * (h == 1 ? 1.0 : -1.0);
        total += std::abs(model.alphas[m]);
    }
    double score = total > 0 ? margin / total : 0.0;
    return {score > 0 ? 1 : 0, score};
}

Prediction predict_gb(const GbModel& model, const SparseVector& x) {
    if (x.dim != model.dim) throw Error("predict: dimension mismatch");
    double f = gb_decision(model, x);
    double p = 1.0 / (1.0 + std::exp(-f));
    return {p > 0.5 ? 1 : 0, p};
}

}  // namespace probdet
