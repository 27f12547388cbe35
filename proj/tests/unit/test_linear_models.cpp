#include "probdet/linear_models.hpp"

#include "probdet/error.hpp"
#include "probdet/rng.hpp"
#include "support/helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace probdet;
using testsupport::featurize;
using testsupport::separable_docs;

namespace {

// Closed-form oracle: log prior + sum_t x_t * ln((count(t,c)+a)/(total_c+a|V|))
std::array<double, 2> mnb_oracle(const std::vector<SparseVector>& X, const std::vector<int>& y,
                                 double alpha, const SparseVector& query) {
    const auto d = static_cast<std::size_t>(X[0].dim);
    std::array<std::vector<double>, 2> counts{std::vector<double>(d, 0.0),
                                              std::vector<double>(d, 0.0)};
    std::array<double, 2> totals{0, 0};
    std::array<double, 2> docs{0, 0};
    for (std::size_t i = 0; i < X.size(); ++i) {
        docs[static_cast<std::size_t>(y[i])] += 1;
        for (const auto& [t, v] : X[i].entries) {
            counts[static_cast<std::size_t>(y[i])][static_cast<std::size_t>(t)] += v;
            totals[static_cast<std::size_t>(y[i])] += v;
        }
    }
    std::array<double, 2> post{};
    for (int c = 0; c < 2; ++c) {
        auto uc = static_cast<std::size_t>(c);
        post[uc] = std::log(docs[uc] / static_cast<double>(X.size()));
        for (const auto& [t, v] : query.entries) {
            double p = (counts[uc][static_cast<std::size_t>(t)] + alpha) /
                       (totals[uc] + alpha * static_cast<double>(d));
            post[uc] += v * std::log(p);
        }
    }
    return post;
}

SparseVector from_dense(const std::vector<double>& dense) {
    SparseVector v;
    v.dim = static_cast<std::int32_t>(dense.size());
    for (std::size_t i = 0; i < dense.size(); ++i) {
        if (dense[i] != 0.0) v.push(static_cast<std::int32_t>(i), dense[i]);
    }
    return v;
}

int count_correct_linear(const LinearModel& model, const std::vector<SparseVector>& X,
                         const std::vector<int>& y) {
    int correct = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        if (predict_linear(model, X[i]).label == y[i]) ++correct;
    }
    return correct;
}

}  // namespace

TEST_CASE("mnb hand example: two tiny documents") {
    // pos: "not good", neg: "good work"; vocabulary {good, not, work}
    std::vector<SparseVector> X = {from_dense({1, 1, 0}), from_dense({1, 0, 1})};
    std::vector<int> y = {1, 0};
    MnbModel model = fit_mnb(X, y, 1.0);

    // p(not|pos) = (1+1)/(2+3) = 0.4 ; p(not|neg) = (0+1)/(2+3) = 0.2
    CHECK(std::exp(model.log_likelihood[1][1]) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(std::exp(model.log_likelihood[0][1]) == doctest::Approx(0.2).epsilon(1e-12));

    SparseVector query = from_dense({0, 1, 0});
    Prediction p = predict_mnb(model, query);
    CHECK(p.label == 1);
    auto post = mnb_log_posteriors(model, query);
    CHECK(post[1] - post[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mnb ties resolve to class 0 and preconditions hold") {
    std::vector<SparseVector> X = {from_dense({1, 0}), from_dense({0, 1})};
    std::vector<int> y = {0, 1};
    MnbModel model = fit_mnb(X, y, 1.0);
    // symmetric corpus, symmetric query -> exact posterior tie
    Prediction p = predict_mnb(model, from_dense({1, 1}));
    CHECK(p.label == 0);

    CHECK_THROWS_AS(fit_mnb(X, y, 0.0), Error);
    CHECK_THROWS_AS(fit_mnb(X, {1, 1}, 1.0), Error);
}

TEST_CASE("mnb matches the closed-form oracle on random small corpora") {
    Rng rng(314);
    for (int trial = 0; trial < 300; ++trial) {
        const int dim = 1 + static_cast<int>(rng.below(5));
        const int docs = 2 + static_cast<int>(rng.below(5));
        std::vector<SparseVector> X;
        std::vector<int> y;
        bool saw0 = false, saw1 = false;
        for (int i = 0; i < docs; ++i) {
            std::vector<double> dense(static_cast<std::size_t>(dim), 0.0);
            for (auto& v : dense) v = static_cast<double>(rng.below(3));
            X.push_back(from_dense(dense));
            int label = static_cast<int>(rng.below(2));
            if (i == docs - 2) label = 0;
            if (i == docs - 1) label = 1;
            saw0 |= label == 0;
            saw1 |= label == 1;
            y.push_back(label);
        }
        REQUIRE((saw0 && saw1));
        double alpha = trial % 2 == 0 ? 1.0 : 0.5;
        MnbModel model = fit_mnb(X, y, alpha);
        std::vector<double> qdense(static_cast<std::size_t>(dim), 0.0);
        for (auto& v : qdense) v = static_cast<double>(rng.below(3));
        SparseVector q = from_dense(qdense);
        auto expected = mnb_oracle(X, y, alpha, q);
        auto got = mnb_log_posteriors(model, q);
        CHECK(std::abs(expected[0] - got[0]) < 1e-12);
        CHECK(std::abs(expected[1] - got[1]) < 1e-12);
    }
}

TEST_CASE("logistic objective gradient matches finite differences") {
    auto data = featurize(separable_docs(), {1, 2});
    Rng rng(55);
    std::vector<double> w(static_cast<std::size_t>(data.vocab.size()));
    for (auto& v : w) v = rng.uniform(-0.5, 0.5);
    double b = rng.uniform(-0.5, 0.5);
    const double C = 10.0;

    auto grad = logreg_gradient(data.X, data.y, w, b, C);
    const double h = 1e-5;
    for (std::size_t j = 0; j < w.size(); ++j) {
        double keep = w[j];
        w[j] = keep + h;
        double plus = logreg_objective(data.X, data.y, w, b, C);
        w[j] = keep - h;
        double minus = logreg_objective(data.X, data.y, w, b, C);
        w[j] = keep;
        double numeric = (plus - minus) / (2 * h);
        double denom = std::max({1.0, std::abs(numeric), std::abs(grad[j])});
        CHECK(std::abs(numeric - grad[j]) / denom < 1e-6);
    }
    double plus = logreg_objective(data.X, data.y, w, b + h, C);
    double minus = logreg_objective(data.X, data.y, w, b - h, C);
    double numeric = (plus - minus) / (2 * h);
    CHECK(std::abs(numeric - grad.back()) / std::max(1.0, std::abs(numeric)) < 1e-6);
}

TEST_CASE("logreg reaches a stationary point and separates the toy corpus") {
    auto data = featurize(separable_docs(), {1, 2});
    LinearModel model = fit_logreg(data.X, data.y, 10.0);
    CHECK(count_correct_linear(model, data.X, data.y) == static_cast<int>(data.y.size()));

    auto grad = logreg_gradient(data.X, data.y, model.weights, model.bias, 10.0);
    double inf_norm = 0.0;
    for (double g : grad) inf_norm = std::max(inf_norm, std::abs(g));
    CHECK(inf_norm <= 1e-6);

    // zero weights score probability one half
    LinearModel zero;
    zero.loss = LossKind::logistic;
    zero.weights.assign(static_cast<std::size_t>(data.vocab.size()), 0.0);
    zero.bias = 0.0;
    CHECK(predict_linear(zero, data.X[0]).score == doctest::Approx(0.5).epsilon(1e-15));

    CHECK_THROWS_AS(fit_logreg(data.X, std::vector<int>(data.y.size(), 1), 10.0), Error);
}

TEST_CASE("logreg objective is within 1e-6 relative of an independent optimizer") {
    auto data = featurize(separable_docs(), {1, 1});
    const double C = 2.0;
    LinearModel model = fit_logreg(data.X, data.y, C);
    double ours = logreg_objective(data.X, data.y, model.weights, model.bias, C);

    // plain gradient descent with a small step as the second optimizer
    std::vector<double> w(model.weights.size(), 0.0);
    double b = 0.0;
    for (int iter = 0; iter < 20000; ++iter) {
        auto grad = logreg_gradient(data.X, data.y, w, b, C);
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= 0.05 * grad[j];
        b -= 0.05 * grad.back();
    }
    double theirs = logreg_objective(data.X, data.y, w, b, C);
    CHECK(ours <= theirs * (1.0 + 1e-6) + 1e-12);
    CHECK(std::abs(ours - theirs) / std::max(1.0, theirs) < 1e-4);
}

TEST_CASE("hinge loss regions") {
    CHECK(hinge_loss(1.3) == 0.0);
    CHECK(hinge_loss(0.3) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(hinge_loss(-2.0) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("sgd separates the toy corpus and beats the zero solution") {
    auto data = featurize(separable_docs(), {1, 2});
    SgdConfig cfg;
    cfg.seed = 5;
    LinearModel model = fit_sgd_linear(data.X, data.y, cfg);
    CHECK(count_correct_linear(model, data.X, data.y) == static_cast<int>(data.y.size()));

    double fitted = sgd_objective(data.X, data.y, model.weights, model.bias, cfg);
    std::vector<double> zero(model.weights.size(), 0.0);
    double at_zero = sgd_objective(data.X, data.y, zero, 0.0, cfg);
    CHECK(fitted < at_zero);
}

TEST_CASE("sgd training is bit-reproducible for a fixed seed") {
    auto data = featurize(separable_docs(), {1, 2});
    SgdConfig cfg;
    cfg.seed = 17;
    LinearModel a = fit_sgd_linear(data.X, data.y, cfg);
    LinearModel b = fit_sgd_linear(data.X, data.y, cfg);
    CHECK(a.bias == b.bias);
    REQUIRE(a.weights.size() == b.weights.size());
    for (std::size_t j = 0; j < a.weights.size(); ++j) CHECK(a.weights[j] == b.weights[j]);
}

TEST_CASE("svm objective beats the zero solution and separates the toys") {
    auto data = featurize(separable_docs(), {1, 2});
    const double C = 1.0;
    LinearModel model = fit_svm(data.X, data.y, C);
    CHECK(count_correct_linear(model, data.X, data.y) == static_cast<int>(data.y.size()));

    std::vector<double> zero(model.weights.size(), 0.0);
    double zero_obj = svm_objective(data.X, data.y, zero, 0.0, C);
    CHECK(zero_obj == doctest::Approx(C * static_cast<double>(data.y.size())).epsilon(1e-15));
    double fitted = svm_objective(data.X, data.y, model.weights, model.bias, C);
    CHECK(fitted <= zero_obj);
}

TEST_CASE("prediction tie and sign rules") {
    LinearModel hinge;
    hinge.loss = LossKind::hinge;
    hinge.weights = {1.0, -1.0};
    hinge.bias = 0.0;
    SparseVector x;
    x.dim = 2;  // empty vector scores exactly zero
    Prediction p = predict_linear(hinge, x);
    CHECK(p.label == 0);
    CHECK(p.score == 0.0);

    SparseVector wrong_dim;
    wrong_dim.dim = 3;
    CHECK_THROWS_AS(predict_linear(hinge, wrong_dim), Error);
}

TEST_CASE("scaling inputs and C together keeps separable labels") {
    auto data = featurize(separable_docs(), {1, 1});
    LinearModel base = fit_svm(data.X, data.y, 1.0);
    std::vector<SparseVector> scaled = data.X;
    for (auto& row : scaled) {
        for (auto& [idx, value] : row.entries) value *= 2.5;
    }
    LinearModel rescaled = fit_svm(scaled, data.y, 1.0 / 2.5);
    for (std::size_t i = 0; i < data.X.size(); ++i) {
        CHECK(predict_linear(base, data.X[i]).label ==
              predict_linear(rescaled, scaled[i]).label);
    }
}

TEST_CASE("top coefficients order, ties and clamping") {
    auto data = featurize({{"aa bb", 1}, {"cc dd", 0}}, {1, 1});
    LinearModel model;
    model.loss = LossKind::hinge;
    model.weights = {0.5, -0.25, 0.0, 0.5};  // aa, bb, cc, dd
    model.bias = 0.0;

    CoefficientReport report = top_coefficients(model, data.vocab, 2);
    REQUIRE(report.positive.size() == 2);
    CHECK(report.positive[0].first == "aa");  // tie with dd broken lexicographically
    CHECK(report.positive[1].first == "dd");
    CHECK(report.negative[0].first == "bb");

    CoefficientReport clamped = top_coefficients(model, data.vocab, 99);
    CHECK(clamped.positive.size() == 4);

    LinearModel zeros;
    zeros.weights.assign(4, 0.0);
    CoefficientReport zr = top_coefficients(zeros, data.vocab, 3);
    for (const auto& [term, weight] : zr.positive) CHECK(weight == 0.0);
}
