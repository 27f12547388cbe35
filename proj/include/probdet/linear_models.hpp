#pragma once

#include "probdet/sparse.hpp"
#include "probdet/text_features.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace probdet {

struct Prediction {
    int label = 0;
    double score = 0.0;
};

// Multinomial naive Bayes with Lidstone smoothing.
struct MnbModel {
    std::array<double, 2> log_prior{};
    std::array<std::vector<double>, 2> log_likelihood;  // per class, per term
    double smoothing = 1.0;
    std::int32_t dim = 0;
};

enum class LossKind { logistic, hinge };

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    LossKind loss = LossKind::logistic;
    // regularization spec: C for logistic/SVM, (alpha_reg, l1_ratio) for SGD
    double C = 0.0;
    double alpha_reg = 0.0;
    double l1_ratio = 0.0;
};

struct SgdConfig {
    double alpha_reg = 0.001;
    double l1_ratio = 0.15;
    int epochs = 20;
    double eta0 = 0.1;
    std::uint64_t seed = 0;
};

// p(t|c) = (count(t,c) + a) / (sum_t count(t,c) + a*|V|); priors from class
// frequencies. X may hold fractional "counts" (e.g. tf-idf weights).
MnbModel fit_mnb(const std::vector<SparseVector>& X, const std::vector<int>& y, double alpha);

std::array<double, 2> mnb_log_posteriors(const MnbModel& model, const SparseVector& x);
Prediction predict_mnb(const MnbModel& model, const SparseVector& x);

// Minimizes 0.5*||w||^2 + C * sum_i ln(1 + exp(-y_i (w.x_i + b))) with the
// bias unregularized, by L-BFGS, until the gradient max-norm falls below
// 1e-6 or 1000 iterations pass.
LinearModel fit_logreg(const std::vector<SparseVector>& X, const std::vector<int>& y,
                       double C = 10.0);

// Elastic-net-regularized hinge loss by seeded, shuffled SGD with step
// schedule eta_t = eta0 / (1 + eta0*alpha_reg*t).
LinearModel fit_sgd_linear(const std::vector<SparseVector>& X, const std::vector<int>& y,
                           const SgdConfig& cfg);

// Minimizes 0.5*||w||^2 + C * sum_i hinge(y_i, w.x_i + b) by dual
// coordinate descent (bias handled as an augmented feature during the
// solve).
LinearModel fit_svm(const std::vector<SparseVector>& X, const std::vector<int>& y, double C = 1.0);

// score = w.x + b; label 1 iff score > 0 (ties negative). Logistic models
// report sigma(score) as the score.
Prediction predict_linear(const LinearModel& model, const SparseVector& x);

double hinge_loss(double margin);

// Objective evaluators, exposed so solutions can be compared against
// alternative optimizers and reference points.
double logreg_objective(const std::vector<SparseVector>& X, const std::vector<int>& y,
                        const std::vector<double>& w, double b, double C);
// Gradient of the logistic objective; last component is d/db.
std::vector<double> logreg_gradient(const std::vector<SparseVector>& X, const std::vector<int>& y,
                                    const std::vector<double>& w, double b, double C);
double svm_objective(const std::vector<SparseVector>& X, const std::vector<int>& y,
                     const std::vector<double>& w, double b, double C);
double sgd_objective(const std::vector<SparseVector>& X, const std::vector<int>& y,
                     const std::vector<double>& w, double b, const SgdConfig& cfg);

struct CoefficientReport {
    std::vector<std::pair<std::string, double>> positive;  // weight descending
    std::vector<std::pair<std::string, double>> negative;  // weight ascending
};

// k most positive and k most negative weights with their vocabulary terms;
// ties broken lexicographically; k clamped to |V|.
CoefficientReport top_coefficients(const LinearModel& model, const Vocabulary& vocab, int k);

}  // namespace probdet
