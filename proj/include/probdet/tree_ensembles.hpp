#pragma once

#include "probdet/linear_models.hpp"
#include "probdet/rng.hpp"
#include "probdet/sparse.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

namespace probdet {

// Binary tree over sparse features. Internal nodes route value <= threshold
// to the left child. Leaves carry the weighted class counts (classification)
// or the fitted leaf value (regression stages).
struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::unique_ptr<TreeNode> left;
    std::unique_ptr<TreeNode> right;
    double value = 0.0;                 // class-1 share or regression value
    std::array<double, 2> counts{0, 0};  // weighted class counts at leaves

    bool is_leaf() const { return feature < 0; }
};

// 1 - sum_c p_c^2 over class counts; total must be positive.
double gini(const std::vector<double>& class_counts);

// Greedy CART on Gini impurity. Candidate thresholds are midpoints between
// consecutive distinct observed values, with absent sparse entries counted
// as exact zeros. Ties in impurity decrease resolve to the lower feature
// index, then the lower threshold. max_features <= 0 considers every
// feature; otherwise a seeded sample of that many features per node.
std::unique_ptr<TreeNode> fit_tree(const std::vector<SparseVector>& X, const std::vector<int>& y,
                                   int max_depth, int max_features, Rng& rng);

std::unique_ptr<TreeNode> fit_tree_weighted(const std::vector<SparseVector>& X,
                                            const std::vector<int>& y,
                                            const std::vector<double>& sample_weights,
                                            int max_depth, int max_features, Rng& rng);

int tree_predict_label(const TreeNode& root, const SparseVector& x);
double tree_predict_value(const TreeNode& root, const SparseVector& x);

struct ForestConfig {
    int n_trees = 300;
    int max_depth = 100;
    std::uint64_t seed = 0;
    bool bootstrap = true;  // test hook; production forests always bootstrap
};

struct ForestModel {
    std::vector<std::unique_ptr<TreeNode>> trees;
    ForestConfig cfg;
    std::int32_t dim = 0;
};

// Per tree: bootstrap sample (seed stream derived from (seed, tree index))
// and floor(sqrt(d)) candidate features per split. Majority vote predicts.
ForestModel fit_random_forest(const std::vector<SparseVector>& X, const std::vector<int>& y,
                              const ForestConfig& cfg);

struct AdaBoostConfig {
    int n_estimators = 170;
    double learning_rate = 0.8;
};

// Sample weights and stage multipliers after fitting.
struct BoostState {
    std::vector<double> sample_weights;
    std::vector<double> stage_alphas;
    double learning_rate = 0.8;
};

struct AdaBoostModel {
    std::vector<std::unique_ptr<TreeNode>> stumps;
    std::vector<double> alphas;
    AdaBoostConfig cfg;
    std::int32_t dim = 0;
};

// SAMME over depth-1 stumps: alpha_m = lr * ln((1-err)/err) with err
// floored at 1e-10; misclassified weights scaled by exp(alpha_m); stops
// early on err >= 0.5 or a perfect stump.
std::pair<AdaBoostModel, BoostState> fit_adaboost(const std::vector<SparseVector>& X,
                                                  const std::vector<int>& y,
                                                  const AdaBoostConfig& cfg);

struct GbConfig {
    int n_estimators = 150;
    double learning_rate = 0.3;  // shrinkage nu
    int max_depth = 3;
};

struct GbModel {
    double f0 = 0.0;  // initial log-odds
    std::vector<std::unique_ptr<TreeNode>> stages;
    GbConfig cfg;
    std::int32_t dim = 0;
};

// Logistic-loss gradient boosting: each stage fits a regression tree to the
// residuals y - p and applies a Newton leaf value sum(r)/sum(p(1-p)).
GbModel fit_gradient_boost(const std::vector<SparseVector>& X, const std::vector<int>& y,
                           const GbConfig& cfg);

double gb_decision(const GbModel& model, const SparseVector& x);

Prediction predict_forest(const ForestModel& model, const SparseVector& x);
Prediction predict_adaboost(const AdaBoostModel& model, const SparseVector& x);
Prediction predict_gb(const GbModel& model, const SparseVector& x);

}  // namespace probdet
