#include "probdet/linear_models.hpp"

#include "probdet/error.hpp"
#include "probdet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace probdet {

namespace {

void require_two_classes(const std::vector<int>& y) {
    bool saw[2] = {false, false};
    for (int label : y) {
        if (label != 0 && label != 1) throw Error("labels must be 0 or 1");
        saw[static_cast<std::size_t>(label)] = true;
    }
    if (!saw[0] || !saw[1]) throw Error("training data must contain both classes");
}

std::int32_t matrix_dim(const std::vector<SparseVector>& X) {
    if (X.empty()) throw Error("training matrix is empty");
    return X[0].dim;
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// ln(1 + exp(z)) without overflow
double softplus(double z) {
    if (z > 0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

}  // namespace

MnbModel fit_mnb(const std::vector<SparseVector>& X, const std::vector<int>& y, double alpha) {
    if (alpha <= 0) throw Error("fit_mnb requires smoothing alpha > 0");
    require_two_classes(y);
    const std::int32_t d = matrix_dim(X);

    MnbModel model;
    model.smoothing = alpha;
    model.dim = d;
    std::array<std::vector<double>, 2> counts;
    std::array<double, 2> totals{0.0, 0.0};
    std::array<std::int64_t, 2> docs{0, 0};
    counts[0].assign(static_cast<std::size_t>(d), 0.0);
    counts[1].assign(static_cast<std::size_t>(d), 0.0);

    for (std::size_t i = 0; i < X.size(); ++i) {
        auto c = static_cast<std::size_t>(y[i]);
        docs[c] += 1;
        for (const auto& [idx, value] : X[i].entries) {
            if (value < 0) throw Error("fit_mnb requires non-negative features");
            counts[c][static_cast<std::size_t>(idx)] += value;
            totals[c] += value;
        }
    }
    for (std::size_t c = 0; c < 2; ++c) {
        model.log_prior[c] = std::log(static_cast<double>(docs[c]) /
                                      static_cast<double>(X.size()));
        model.log_likelihood[c].resize(static_cast<std::size_t>(d));
        double denom = totals[c] + alpha * static_cast<double>(d);
        for (std::size_t t = 0; t < static_cast<std::size_t>(d); ++t) {
            model.log_likelihood[c][t] = std::log((counts[c][t] + alpha) / denom);
        }
    }
    return model;
}

std::array<double, 2> mnb_log_posteriors(const MnbModel& model, const SparseVector& x) {
    if (x.dim != model.dim) throw Error("predict: dimension mismatch");
    std::array<double, 2> post = model.log_prior;
    for (const auto& [idx, value] : x.entries) {
        post[0] += value * model.log_likelihood[0][static_cast<std::size_t>(idx)];
        post[1] += value * model.log_likelihood[1][static_cast<std::size_t>(idx)];
    }
    return post;
}

Prediction predict_mnb(const MnbModel& model, const SparseVector& x) {
    auto post = mnb_log_posteriors(model, x);
    Prediction out;
    out.label = post[1] > post[0] ? 1 : 0;  // tie goes to class 0
    // posterior probability of class 1 via stable two-way softmax
    double m = std::max(post[0], post[1]);
    double z0 = std::exp(post[0] - m), z1 = std::exp(post[1] - m);
    out.score = z1 / (z0 + z1);
    return out;
}

double logreg_objective(const std::vector<SparseVector>& X, const std::vector<int>& y,
                        const std::vector<double>& w, double b, double C) {
    double obj = 0.5 * std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
    for (std::size_t i = 0; i < X.size(); ++i) {
        double margin = (y[i] == 1 ? 1.0 : -1.0) * (X[i].dot_dense(w) + b);
        obj += C * softplus(-margin);
    }
    return obj;
}

std::vector<double> logreg_gradient(const std::vector<SparseVector>& X, const std::vector<int>& y,
                                    const std::vector<double>& w, double b, double C) {
    std::vector<double> grad(w.size() + 1, 0.0);
    std::copy(w.begin(), w.end(), grad.begin());
    for (std::size_t i = 0; i < X.size(); ++i) {
        double sign = y[i] == 1 ? 1.0 : -1.0;
        double margin = sign * (X[i].dot_dense(w) + b);
        double coef = C * -sign * sigmoid(-margin);
        for (const auto& [idx, value] : X[i].entries) {
            grad[static_cast<std::size_t>(idx)] += coef * value;
        }
        grad.back() += coef;
    }
    return grad;
}

namespace {

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

LinearModel fit_logreg(const std::vector<SparseVector>& X, const std::vector<int>& y,
                       double C) {
    if (C <= 0) throw Error("fit_logreg requires C > 0");
    require_two_classes(y);
    const auto d = static_cast<std::size_t>(matrix_dim(X));
    const auto n = X.size();

    // Newton-CG on the augmented variable [w; b]. The Hessian is
    // I_w + C * sum_i sigma(m_i) sigma(-m_i) x~_i x~_i^T with x~ = [x; 1]
    // and the identity block absent on the bias coordinate, so
    // Hessian-vector products cost one pass over the nonzeros.
    std::vector<double> theta(d + 1, 0.0);
    std::vector<double> margins(n), curvature(n);

    auto compute_margins = [&]() {
        for (std::size_t i = 0; i < n; ++i) {
            double score = theta.back();
            for (const auto& [idx, value] : X[i].entries) {
                score += value * theta[static_cast<std::size_t>(idx)];
            }
            margins[i] = (y[i] == 1 ? 1.0 : -1.0) * score;
        }
    };
    auto objective_at = [&](const std::vector<double>& t) {
        double obj = 0.5 * std::inner_product(t.begin(), t.end() - 1, t.begin(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double score = t.back();
            for (const auto& [idx, value] : X[i].entries) {
                score += value * t[static_cast<std::size_t>(idx)];
            }
            obj += C * softplus(-(y[i] == 1 ? 1.0 : -1.0) * score);
        }
        return obj;
    };
    auto hessian_times = [&](const std::vector<double>& v, std::vector<double>& out) {
        std::copy(v.begin(), v.end() - 1, out.begin());
        out.back() = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double xv = v.back();
            for (const auto& [idx, value] : X[i].entries) {
                xv += value * v[static_cast<std::size_t>(idx)];
            }
            double coef = curvature[i] * xv;
            for (const auto& [idx, value] : X[i].entries) {
                out[static_cast<std::size_t>(idx)] += coef * value;
            }
            out.back() += coef;
        }
    };

    constexpr double kTol = 1e-6;
    std::vector<double> grad(d + 1), step(d + 1), residual(d + 1), direction(d + 1),
        h_dir(d + 1), trial(d + 1);
    for (int iter = 0; iter < 1000; ++iter) {
        compute_margins();
        std::fill(grad.begin(), grad.end(), 0.0);
        std::copy(theta.begin(), theta.end() - 1, grad.begin());
        for (std::size_t i = 0; i < n; ++i) {
            double sign = y[i] == 1 ? 1.0 : -1.0;
            double coef = C * -sign * sigmoid(-margins[i]);
            for (const auto& [idx, value] : X[i].entries) {
                grad[static_cast<std::size_t>(idx)] += coef * value;
            }
            grad.back() += coef;
            curvature[i] = C * sigmoid(margins[i]) * sigmoid(-margins[i]);
        }
        if (inf_norm(grad) <= kTol) break;

        // conjugate gradient on H step = -grad, forcing-sequence tolerance
        std::fill(step.begin(), step.end(), 0.0);
        for (std::size_t j = 0; j < grad.size(); ++j) residual[j] = -grad[j];
        direction = residual;
        double rr = dot(residual, residual);
        const double cg_tol = std::min(0.5, std::sqrt(std::sqrt(rr))) * std::sqrt(rr);
        for (int cg = 0; cg < 250 && std::sqrt(rr) > cg_tol; ++cg) {
            hessian_times(direction, h_dir);
            double dhd = dot(direction, h_dir);
            if (dhd <= 0) break;  // cannot happen for this Hessian, but stay safe
            double alpha = rr / dhd;
            for (std::size_t j = 0; j < step.size(); ++j) {
                step[j] += alpha * direction[j];
                residual[j] -= alpha * h_dir[j];
            }
            double rr_new = dot(residual, residual);
            double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t j = 0; j < direction.size(); ++j) {
                direction[j] = residual[j] + beta * direction[j];
            }
        }

        double slope = dot(step, grad);
        if (slope >= 0) {
            for (std::size_t j = 0; j < step.size(); ++j) step[j] = -grad[j];
            slope = -dot(grad, grad);
        }
        double f = objective_at(theta);
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            for (std::size_t j = 0; j < theta.size(); ++j) trial[j] = theta[j] + t * step[j];
            if (objective_at(trial) <= f + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        theta = trial;
    }

    LinearModel model;
    model.loss = LossKind::logistic;
    model.C = C;
    model.weights.assign(theta.begin(), theta.end() - 1);
    model.bias = theta.back();
    return model;
}

double hinge_loss(double margin) { return std::max(0.0, 1.0 - margin); }

double sgd_objective(const std::vector<SparseVector>& X, const std::vector<int>& y,
                     const std::vector<double>& w, double b, const SgdConfig& cfg) {
    double loss = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double margin = (y[i] == 1 ? 1.0 : -1.0) * (X[i].dot_dense(w) + b);
        loss += hinge_loss(margin);
    }
    loss /= static_cast<double>(X.size());
    double l1 = 0.0, l2 = 0.0;
    for (double v : w) {
        l1 += std::abs(v);
        l2 += v * v;
    }
    return loss + cfg.alpha_reg * (cfg.l1_ratio * l1 + (1.0 - cfg.l1_ratio) * 0.5 * l2);
}

LinearModel fit_sgd_linear(const std::vector<SparseVector>& X, const std::vector<int>& y,
                           const SgdConfig& cfg) {
    if (cfg.alpha_reg <= 0) throw Error("fit_sgd_linear requires alpha_reg > 0");
    if (cfg.l1_ratio < 0 || cfg.l1_ratio > 1) throw Error("l1_ratio must be in [0, 1]");
    require_two_classes(y);
    const auto d = static_cast<std::size_t>(matrix_dim(X));

    std::vector<double> w(d, 0.0);
    double b = 0.0;
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(X.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::int64_t t = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t i : order) {
            double eta = cfg.eta0 /
                         (1.0 + cfg.eta0 * cfg.alpha_reg * static_cast<double>(t));
            ++t;
            double sign = y[i] == 1 ? 1.0 : -1.0;
            double margin = sign * (X[i].dot_dense(w) + b);
            // elastic-net subgradient (sign(0) taken as 0), bias unpenalized
            for (std::size_t j = 0; j < d; ++j) {
                double sub = cfg.l1_ratio * (w[j] > 0 ? 1.0 : (w[j] < 0 ? -1.0 : 0.0)) +
                             (1.0 - cfg.l1_ratio) * w[j];
                w[j] -= eta * cfg.alpha_reg * sub;
            }
            if (margin < 1.0) {
                for (const auto& [idx, value] : X[i].entries) {
                    w[static_cast<std::size_t>(idx)] += eta * sign * value;
                }
                b += eta * sign;
            }
        }
    }

    LinearModel model;
    model.loss = LossKind::hinge;
    model.alpha_reg = cfg.alpha_reg;
    model.l1_ratio = cfg.l1_ratio;
    model.weights = std::move(w);
    model.bias = b;
    return model;
}

double svm_objective(const std::vector<SparseVector>& X, const std::vector<int>& y,
                     const std::vector<double>& w, double b, double C) {
    double obj = 0.5 * std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
    for (std::size_t i = 0; i < X.size(); ++i) {
        double margin = (y[i] == 1 ? 1.0 : -1.0) * (X[i].dot_dense(w) + b);
        obj += C * hinge_loss(margin);
    }
    return obj;
}

LinearModel fit_svm(const std::vector<SparseVector>& X, const std::vector<int>& y, double C) {
    if (C <= 0) throw Error("fit_svm requires C > 0");
    require_two_classes(y);
    const auto d = static_cast<std::size_t>(matrix_dim(X));
    const std::size_t n = X.size();

    // Dual coordinate descent on the L1-loss SVM, with the bias carried as
    // an augmented unit feature during the solve.
    std::vector<double> w(d + 1, 0.0);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> q_diag(n);
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        q_diag[i] = X[i].squared_norm() + 1.0;
        ys[i] = y[i] == 1 ? 1.0 : -1.0;
    }

    constexpr double kTol = 1e-8;
    for (int pass = 0; pass < 1000; ++pass) {
        double max_violation = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double score = X[i].dot_dense(w) + w[d];
            double g = ys[i] * score - 1.0;
            double pg = g;
            if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
            else if (alpha[i] >= C) pg = std::max(g, 0.0);
            max_violation = std::max(max_violation, std::abs(pg));
            if (std::abs(pg) < 1e-14) continue;
            double a_new = std::clamp(alpha[i] - g / q_diag[i], 0.0, C);
            double delta = (a_new - alpha[i]) * ys[i];
            alpha[i] = a_new;
            for (const auto& [idx, value] : X[i].entries) {
                w[static_cast<std::size_t>(idx)] += delta * value;
            }
            w[d] += delta;
        }
        if (max_violation < kTol) break;
    }

    LinearModel model;
    model.loss = LossKind::hinge;
    model.C = C;
    model.bias = w[d];
    w.pop_back();
    model.weights = std::move(w);
    return model;
}

Prediction predict_linear(const LinearModel& model, const SparseVector& x) {
    if (static_cast<std::size_t>(x.dim) != model.weights.size()) {
        throw Error("predict: dimension mismatch");
    }
    double raw = x.dot_dense(model.weights) + model.bias;
    Prediction out;
    out.label = raw > 0 ? 1 : 0;
    out.score = model.loss == LossKind::logistic ? sigmoid(raw) : raw;
    return out;
}

CoefficientReport top_coefficients(const LinearModel& model, const Vocabulary& vocab, int k) {
    if (model.weights.size() != static_cast<std::size_t>(vocab.size())) {
        throw Error("top_coefficients: model/vocabulary size mismatch");
    }
    const auto v = model.weights.size();
    k = std::min<int>(k, static_cast<int>(v));
    std::vector<std::int32_t> idx(v);
    std::iota(idx.begin(), idx.end(), 0);

    auto by_weight_desc = [&](std::int32_t a, std::int32_t b) {
        auto wa = model.weights[static_cast<std::size_t>(a)];
        auto wb = model.weights[static_cast<std::size_t>(b)];
        if (wa != wb) return wa > wb;
        return vocab.terms[static_cast<std::size_t>(a)] < vocab.terms[static_cast<std::size_t>(b)];
    };
    auto by_weight_asc = [&](std::int32_t a, std::int32_t b) {
        auto wa = model.weights[static_cast<std::size_t>(a)];
        auto wb = model.weights[static_cast<std::size_t>(b)];
        if (wa != wb) return wa < wb;
        return vocab.terms[static_cast<std::size_t>(a)] < vocab.terms[static_cast<std::size_t>(b)];
    };

    CoefficientReport report;
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), by_weight_desc);
    for (int i = 0; i < k; ++i) {
        auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
        report.positive.emplace_back(vocab.terms[j], model.weights[j]);
    }
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), by_weight_asc);
    for (int i = 0; i < k; ++i) {
        auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
        report.negative.emplace_back(vocab.terms[j], model.weights[j]);
    }
    return report;
}

}  // namespace probdet
