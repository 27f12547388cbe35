#include "probdet/neural/network.hpp"

#include "probdet/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace probdet {

void glorot_fill(Mat& m, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = rng.uniform(-limit, limit);
        }
    }
}

namespace {

double stable_sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

Mat activate(const Mat& pre, Activation act) {
    switch (act) {
        case Activation::identity: return pre;
        case Activation::relu: return pre.cwiseMax(0.0);
        case Activation::tanh_act: return pre.array().tanh().matrix();
    }
    return pre;
}

Mat activation_grad(const Mat& pre, const Mat& post, Activation act) {
    switch (act) {
        case Activation::identity: return Mat::Ones(pre.rows(), pre.cols());
        case Activation::relu:
            return (pre.array() > 0.0).cast<double>().matrix();
        case Activation::tanh_act:
            return (1.0 - post.array().square()).matrix();
    }
    return Mat::Ones(pre.rows(), pre.cols());
}

}  // namespace

Mat dense_forward(const Mat& x, const DenseParams& p, Activation act, DenseCache* cache) {
    if (x.cols() != p.W.cols()) throw Error("dense: shape mismatch");
    Mat pre = x * p.W.transpose();
    pre.rowwise() += p.b.col(0).transpose();
    Mat y = activate(pre, act);
    if (cache) {
        cache->x = x;
        cache->pre = std::move(pre);
    }
    return y;
}

Mat dense_apply(const Mat& x, const DenseParams& p, Activation act) {
    return dense_forward(x, p, act, nullptr);
}

Mat dense_backward(const Mat& dy, const DenseParams& p, Activation act, const DenseCache& cache,
                   Mat& dW, Mat& db) {
    Mat post = activate(cache.pre, act);
    Mat dpre = dy.cwiseProduct(activation_grad(cache.pre, post, act));
    dW += dpre.transpose() * cache.x;
    db.col(0) += dpre.colwise().sum().transpose();
    return dpre * p.W;
}

Mat dropout_apply(const Mat& x, double p_drop, DropoutMode mode, Rng& rng, Mat* mask_out) {
    if (p_drop < 0.0 || p_drop >= 1.0) throw Error("dropout rate must be in [0, 1)");
    if (mode == DropoutMode::eval || p_drop == 0.0) {
        if (mask_out) *mask_out = Mat::Ones(x.rows(), x.cols());
        return x;
    }
    const double scale = 1.0 / (1.0 - p_drop);
    Mat mask(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            mask(r, c) = rng.unit_real() < p_drop ? 0.0 : scale;
        }
    }
    Mat y = x.cwiseProduct(mask);
    if (mask_out) *mask_out = std::move(mask);
    return y;
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

Vec gru_step_cached(const GruParams& p, const Vec& x, const Vec& h_prev, GruStepCache& cache) {
    Vec az = p.Wz * x + p.Uz * h_prev + p.bz.col(0);
    Vec ar = p.Wr * x + p.Ur * h_prev + p.br.col(0);
    Vec z = az.unaryExpr([](double v) { return stable_sigmoid(v); });
    Vec r = ar.unaryExpr([](double v) { return stable_sigmoid(v); });
    Vec ah = p.Wh * x + p.Uh * r.cwiseProduct(h_prev) + p.bh.col(0);
    Vec hc = ah.array().tanh().matrix();
    Vec h = (Vec::Ones(z.size()) - z).cwiseProduct(h_prev) + z.cwiseProduct(hc);
    cache.x = x;
    cache.h_prev = h_prev;
    cache.z = std::move(z);
    cache.r = std::move(r);
    cache.hc = std::move(hc);
    return h;
}

Vec gru_step(const GruParams& p, const Vec& x, const Vec& h_prev) {
    GruStepCache cache;
    return gru_step_cached(p, x, h_prev, cache);
}

GruGrads make_gru_grads(const GruParams& p) {
    GruGrads g;
    g.dWz = Mat::Zero(p.Wz.rows(), p.Wz.cols());
    g.dUz = Mat::Zero(p.Uz.rows(), p.Uz.cols());
    g.dWr = Mat::Zero(p.Wr.rows(), p.Wr.cols());
    g.dUr = Mat::Zero(p.Ur.rows(), p.Ur.cols());
    g.dWh = Mat::Zero(p.Wh.rows(), p.Wh.cols());
    g.dUh = Mat::Zero(p.Uh.rows(), p.Uh.cols());
    g.dbz = Mat::Zero(p.bz.rows(), 1);
    g.dbr = Mat::Zero(p.br.rows(), 1);
    g.dbh = Mat::Zero(p.bh.rows(), 1);
    return g;
}

Vec gru_step_backward(const GruParams& p, const GruStepCache& cache, const Vec& dh,
                      GruGrads& grads, Vec& dx) {
    const Vec& z = cache.z;
    const Vec& r = cache.r;
    const Vec& hc = cache.hc;
    const Vec& hp = cache.h_prev;

    Vec dz = dh.cwiseProduct(hc - hp);
    Vec dhc = dh.cwiseProduct(z);
    Vec dhp = dh.cwiseProduct(Vec::Ones(z.size()) - z);

    Vec dah = dhc.cwiseProduct((1.0 - hc.array().square()).matrix());
    grads.dWh += dah * cache.x.transpose();
    grads.dUh += dah * r.cwiseProduct(hp).transpose();
    grads.dbh.col(0) += dah;
    Vec drhp = p.Uh.transpose() * dah;
    Vec dr = drhp.cwiseProduct(hp);
    dhp += drhp.cwiseProduct(r);

    Vec daz = dz.cwiseProduct(z.cwiseProduct(Vec::Ones(z.size()) - z));
    grads.dWz += daz * cache.x.transpose();
    grads.dUz += daz * hp.transpose();
    grads.dbz.col(0) += daz;
    dhp += p.Uz.transpose() * daz;

    Vec dar = dr.cwiseProduct(r.cwiseProduct(Vec::Ones(r.size()) - r));
    grads.dWr += dar * cache.x.transpose();
    grads.dUr += dar * hp.transpose();
    grads.dbr.col(0) += dar;
    dhp += p.Ur.transpose() * dar;

    dx = p.Wz.transpose() * daz + p.Wr.transpose() * dar + p.Wh.transpose() * dah;
    return dhp;
}

Mat gru_run(const GruParams& p, const Mat& inputs, const std::vector<char>& mask, bool reverse,
            GruSequenceCache* cache) {
    const auto T = static_cast<int>(inputs.rows());
    if (static_cast<int>(mask.size()) != T) throw Error("gru: mask/input length mismatch");
    if (inputs.cols() != p.Wz.cols()) throw Error("gru: input dimension mismatch");
    const int h = p.hidden();

    Mat states = Mat::Zero(T, h);
    Vec hidden = Vec::Zero(h);
    for (int step = 0; step < T; ++step) {
        int t = reverse ? T - 1 - step : step;
        if (mask[static_cast<std::size_t>(t)]) {
            GruStepCache step_cache;
            hidden = gru_step_cached(p, inputs.row(t).transpose(), hidden, step_cache);
            if (cache) {
                cache->steps.push_back(std::move(step_cache));
                cache->positions.push_back(t);
            }
        }
        states.row(t) = hidden.transpose();  // masked steps carry the state through
    }
    return states;
}

Mat gru_backprop(const GruParams& p, const Mat& inputs, const std::vector<char>& mask,
                 bool reverse, const GruSequenceCache& cache, const Mat& dstates,
                 GruGrads& grads) {
    const auto T = static_cast<int>(inputs.rows());
    Mat dinputs = Mat::Zero(T, inputs.cols());
    Vec dh_carry = Vec::Zero(p.hidden());

    // Walk the scan order backwards; masked rows fold their output gradient
    // into the carried-state gradient.
    auto step_it = static_cast<int>(cache.steps.size()) - 1;
    for (int step = T - 1; step >= 0; --step) {
        int t = reverse ? T - 1 - step : step;
        dh_carry += dstates.row(t).transpose();
        if (mask[static_cast<std::size_t>(t)]) {
            if (step_it < 0 || cache.positions[static_cast<std::size_t>(step_it)] != t) {
                throw Error("gru_backprop: cache does not match mask");
            }
            Vec dx(inputs.cols());
            dh_carry = gru_step_backward(p, cache.steps[static_cast<std::size_t>(step_it)],
                                         dh_carry, grads, dx);
            dinputs.row(t) = dx.transpose();
            --step_it;
        }
    }
    return dinputs;
}

Mat gru_sequence(const GruParams& fwd, const GruParams* bwd, const Mat& inputs,
                 const std::vector<char>& mask, GruDirection direction) {
    if (direction == GruDirection::forward) return gru_run(fwd, inputs, mask, false, nullptr);
    if (direction == GruDirection::backward) return gru_run(fwd, inputs, mask, true, nullptr);
    if (!bwd) throw Error("bidirectional gru needs backward parameters");
    Mat f = gru_run(fwd, inputs, mask, false, nullptr);
    Mat b = gru_run(*bwd, inputs, mask, true, nullptr);
    Mat out(inputs.rows(), f.cols() + b.cols());
    out << f, b;
    return out;
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

Vec attention_pool(const AttentionParams& p, const Mat& h, const std::vector<char>& mask,
                   Vec* weights_out, AttentionCache* cache) {
    const auto T = static_cast<int>(h.rows());
    if (static_cast<int>(mask.size()) != T) throw Error("attention: mask length mismatch");
    if (h.cols() != p.Wa.cols()) throw Error("attention: state dimension mismatch");

    Mat proj = Mat::Zero(T, p.Wa.rows());
    Vec scores = Vec::Zero(T);
    bool any = false;
    for (int t = 0; t < T; ++t) {
        if (!mask[static_cast<std::size_t>(t)]) continue;
        any = true;
        Vec u = (p.Wa * h.row(t).transpose() + p.ba.col(0)).array().tanh().matrix();
        proj.row(t) = u.transpose();
        scores(t) = p.u_ctx.col(0).dot(u);
    }
    if (!any) throw Error("attention_pool: every position is masked");

    double max_score = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < T; ++t) {
        if (mask[static_cast<std::size_t>(t)]) max_score = std::max(max_score, scores(t));
    }
    Vec weights = Vec::Zero(T);
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
        if (!mask[static_cast<std::size_t>(t)]) continue;
        weights(t) = std::exp(scores(t) - max_score);
        total += weights(t);
    }
    weights /= total;

    Vec context = Vec::Zero(h.cols());
    for (int t = 0; t < T; ++t) {
        if (mask[static_cast<std::size_t>(t)]) context += weights(t) * h.row(t).transpose();
    }
    if (weights_out) *weights_out = weights;
    if (cache) {
        cache->h = h;
        cache->mask = mask;
        cache->proj = std::move(proj);
        cache->weights = std::move(weights);
    }
    return context;
}

AttentionGrads make_attention_grads(const AttentionParams& p) {
    AttentionGrads g;
    g.dWa = Mat::Zero(p.Wa.rows(), p.Wa.cols());
    g.dba = Mat::Zero(p.ba.rows(), 1);
    g.du_ctx = Mat::Zero(p.u_ctx.rows(), 1);
    return g;
}

Mat attention_backward(const AttentionParams& p, const AttentionCache& cache,
                       const Vec& dcontext, AttentionGrads& grads) {
    const auto T = static_cast<int>(cache.h.rows());
    Mat dh = Mat::Zero(T, cache.h.cols());

    Vec dweights = Vec::Zero(T);
    double weighted_sum = 0.0;
    for (int t = 0; t < T; ++t) {
        if (!cache.mask[static_cast<std::size_t>(t)]) continue;
        dweights(t) = cache.h.row(t) * dcontext;
        dh.row(t) += cache.weights(t) * dcontext.transpose();
        weighted_sum += cache.weights(t) * dweights(t);
    }
    for (int t = 0; t < T; ++t) {
        if (!cache.mask[static_cast<std::size_t>(t)]) continue;
        double dscore = cache.weights(t) * (dweights(t) - weighted_sum);
        Vec u = cache.proj.row(t).transpose();
        Vec du = p.u_ctx.col(0) * dscore;
        grads.du_ctx.col(0) += u * dscore;
        Vec da = du.cwiseProduct((1.0 - u.array().square()).matrix());
        grads.dWa += da * cache.h.row(t);
        grads.dba.col(0) += da;
        dh.row(t) += (p.Wa.transpose() * da).transpose();
    }
    return dh;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_update(Mat& theta, const Mat& grad, Mat& m, Mat& v, long t, double lr,
                 const AdamConfig& cfg) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    Mat m_hat = m / bc1;
    Mat v_hat = v / bc2;
    theta -= lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt() + Mat::Constant(v.rows(), v.cols(), cfg.eps));
}

void adam_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
               AdamState& state, double lr, const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw Error("adam_step: params/grads mismatch");
    if (state.m.empty()) {
        for (const Mat* p : params) {
            state.m.push_back(Mat::Zero(p->rows(), p->cols()));
            state.v.push_back(Mat::Zero(p->rows(), p->cols()));
        }
    }
    ++state.t;
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam_update(*params[i], *grads[i], state.m[i], state.v[i], state.t, lr, cfg);
    }
}

// ---------------------------------------------------------------------------
// Network base
// ---------------------------------------------------------------------------

void Network::zero_gradients() {
    for (auto& block : param_blocks()) block.grad->setZero();
}

std::vector<Mat> Network::snapshot_params() {
    std::vector<Mat> snapshot;
    for (auto& block : param_blocks()) snapshot.push_back(*block.value);
    return snapshot;
}

void Network::restore_params(const std::vector<Mat>& snapshot) {
    auto blocks = param_blocks();
    if (snapshot.size() != blocks.size()) throw Error("restore_params: block count mismatch");
    for (std::size_t i = 0; i < blocks.size(); ++i) *blocks[i].value = snapshot[i];
}

std::int64_t Network::parameter_count() {
    std::int64_t n = 0;
    for (auto& block : param_blocks()) n += block.value->size();
    return n;
}

namespace {

struct SoftmaxLoss {
    double loss;
    Vec dlogits;  // p - onehot(y)
};

SoftmaxLoss softmax2_loss(const Vec& logits, int label) {
    double m = std::max(logits(0), logits(1));
    double e0 = std::exp(logits(0) - m), e1 = std::exp(logits(1) - m);
    double lse = m + std::log(e0 + e1);
    SoftmaxLoss out;
    out.loss = lse - logits(label);
    out.dlogits = Vec(2);
    out.dlogits(0) = e0 / (e0 + e1) - (label == 0 ? 1.0 : 0.0);
    out.dlogits(1) = e1 / (e0 + e1) - (label == 1 ? 1.0 : 0.0);
    return out;
}

double softmax2_prob1(const Vec& logits) {
    double m = std::max(logits(0), logits(1));
    double e0 = std::exp(logits(0) - m), e1 = std::exp(logits(1) - m);
    return e1 / (e0 + e1);
}

Vec dropout_vec(const Vec& x, double p_drop, bool on, Rng& rng, Vec* mask_out) {
    if (!on || p_drop == 0.0) {
        if (mask_out) *mask_out = Vec::Ones(x.size());
        return x;
    }
    const double scale = 1.0 / (1.0 - p_drop);
    Vec mask(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        mask(i) = rng.unit_real() < p_drop ? 0.0 : scale;
    }
    if (mask_out) *mask_out = mask;
    return x.cwiseProduct(mask);
}

Vec affine(const DenseParams& p, const Vec& x) { return p.W * x + p.b.col(0); }

Vec relu(const Vec& v) { return v.cwiseMax(0.0); }

Vec relu_grad_mask(const Vec& pre) {
    return (pre.array() > 0.0).cast<double>().matrix();
}

DenseParams make_dense(int out, int in, Rng& rng) {
    DenseParams p;
    p.W = Mat(out, in);
    glorot_fill(p.W, in, out, rng);
    p.b = Mat::Zero(out, 1);
    return p;
}

GruParams make_gru(int hidden, int input, Rng& rng) {
    GruParams p;
    auto weight = [&](int r, int c) {
        Mat m(r, c);
        glorot_fill(m, c, r, rng);
        return m;
    };
    p.Wz = weight(hidden, input);
    p.Uz = weight(hidden, hidden);
    p.Wr = weight(hidden, input);
    p.Ur = weight(hidden, hidden);
    p.Wh = weight(hidden, input);
    p.Uh = weight(hidden, hidden);
    p.bz = Mat::Zero(hidden, 1);
    p.br = Mat::Zero(hidden, 1);
    p.bh = Mat::Zero(hidden, 1);
    return p;
}

AttentionParams make_attention(int att, int state, Rng& rng) {
    AttentionParams p;
    p.Wa = Mat(att, state);
    glorot_fill(p.Wa, state, att, rng);
    p.ba = Mat::Zero(att, 1);
    p.u_ctx = Mat(att, 1);
    glorot_fill(p.u_ctx, att, 1, rng);
    return p;
}

void register_dense(std::vector<ParamBlock>& blocks, const std::string& name, DenseParams& p,
                    DenseParams& g) {
    blocks.push_back({name + ".W", &p.W, &g.W});
    blocks.push_back({name + ".b", &p.b, &g.b});
}

void register_gru(std::vector<ParamBlock>& blocks, const std::string& name, GruParams& p,
                  GruGrads& g) {
    blocks.push_back({name + ".Wz", &p.Wz, &g.dWz});
    blocks.push_back({name + ".Uz", &p.Uz, &g.dUz});
    blocks.push_back({name + ".bz", &p.bz, &g.dbz});
    blocks.push_back({name + ".Wr", &p.Wr, &g.dWr});
    blocks.push_back({name + ".Ur", &p.Ur, &g.dUr});
    blocks.push_back({name + ".br", &p.br, &g.dbr});
    blocks.push_back({name + ".Wh", &p.Wh, &g.dWh});
    blocks.push_back({name + ".Uh", &p.Uh, &g.dUh});
    blocks.push_back({name + ".bh", &p.bh, &g.dbh});
}

void register_attention(std::vector<ParamBlock>& blocks, const std::string& name,
                        AttentionParams& p, AttentionGrads& g) {
    blocks.push_back({name + ".Wa", &p.Wa, &g.dWa});
    blocks.push_back({name + ".ba", &p.ba, &g.dba});
    blocks.push_back({name + ".u", &p.u_ctx, &g.du_ctx});
}

DenseParams zero_like(const DenseParams& p) {
    DenseParams g;
    g.W = Mat::Zero(p.W.rows(), p.W.cols());
    g.b = Mat::Zero(p.b.rows(), 1);
    return g;
}

// ---------------------------------------------------------------------------
// MLP over precomputed 768-d vectors
// ---------------------------------------------------------------------------

class MlpNet final : public Network {
public:
    explicit MlpNet(NetworkSpec spec) : Network(spec) {
        Rng rng(spec.seed);
        l1_ = make_dense(spec.mlp_hidden1, spec.input_dim, rng);
        l2_ = make_dense(spec.mlp_hidden2, spec.mlp_hidden1, rng);
        head_ = make_dense(2, spec.mlp_hidden2, rng);
        g1_ = zero_like(l1_);
        g2_ = zero_like(l2_);
        gh_ = zero_like(head_);
    }

    std::vector<ParamBlock> param_blocks() override {
        std::vector<ParamBlock> blocks;
        register_dense(blocks, "l1", l1_, g1_);
        register_dense(blocks, "l2", l2_, g2_);
        register_dense(blocks, "head", head_, gh_);
        return blocks;
    }

    double predict_prob(const NeuralInput& input) const override {
        const Vec& x = expect_vec(input);
        Vec h1 = relu(affine(l1_, x));
        Vec h2 = relu(affine(l2_, h1));
        return softmax2_prob1(affine(head_, h2));
    }

    double accumulate_gradients(const NeuralInput& input, int label, bool dropout_on,
                                Rng& rng) override {
        const Vec& x = expect_vec(input);
        Vec pre1 = affine(l1_, x);
        Vec h1 = relu(pre1);
        Vec mask;
        Vec h1d = dropout_vec(h1, spec_.dropout_head, dropout_on, rng, &mask);
        Vec pre2 = affine(l2_, h1d);
        Vec h2 = relu(pre2);
        Vec logits = affine(head_, h2);
        auto loss = softmax2_loss(logits, label);

        gh_.W += loss.dlogits * h2.transpose();
        gh_.b.col(0) += loss.dlogits;
        Vec dh2 = head_.W.transpose() * loss.dlogits;
        Vec dpre2 = dh2.cwiseProduct(relu_grad_mask(pre2));
        g2_.W += dpre2 * h1d.transpose();
        g2_.b.col(0) += dpre2;
        Vec dh1d = l2_.W.transpose() * dpre2;
        Vec dh1 = dh1d.cwiseProduct(mask);
        Vec dpre1 = dh1.cwiseProduct(relu_grad_mask(pre1));
        g1_.W += dpre1 * x.transpose();
        g1_.b.col(0) += dpre1;
        return loss.loss;
    }

private:
    static const Vec& expect_vec(const NeuralInput& input) {
        const Vec* v = std::get_if<Vec>(&input);
        if (!v) throw Error("mlp_precomputed expects a dense vector input");
        return *v;
    }

    DenseParams l1_, l2_, head_;
    DenseParams g1_, g2_, gh_;
};

// ---------------------------------------------------------------------------
// BiGRU with mean or attention pooling
// ---------------------------------------------------------------------------

class BiGruNet final : public Network {
public:
    BiGruNet(NetworkSpec spec, bool use_attention) : Network(spec), attention_(use_attention) {
        Rng rng(spec.seed);
        const int h = spec.gru_hidden;
        fwd_ = make_gru(h, spec.input_dim, rng);
        bwd_ = make_gru(h, spec.input_dim, rng);
        const int state = 2 * h;
        if (attention_) {
            int att = spec.attention_dim > 0 ? spec.attention_dim : state;
            att_ = make_attention(att, state, rng);
            gatt_ = make_attention_grads(att_);
        }
        dense_ = make_dense(spec.dense_hidden, state, rng);
        head_ = make_dense(2, spec.dense_hidden, rng);
        gfwd_ = make_gru_grads(fwd_);
        gbwd_ = make_gru_grads(bwd_);
        gdense_ = zero_like(dense_);
        ghead_ = zero_like(head_);
    }

    std::vector<ParamBlock> param_blocks() override {
        std::vector<ParamBlock> blocks;
        register_gru(blocks, "gru_fwd", fwd_, gfwd_);
        register_gru(blocks, "gru_bwd", bwd_, gbwd_);
        if (attention_) register_attention(blocks, "attention", att_, gatt_);
        register_dense(blocks, "dense", dense_, gdense_);
        register_dense(blocks, "head", head_, ghead_);
        return blocks;
    }

    double predict_prob(const NeuralInput& input) const override {
        const auto& seq = expect_seq(input);
        Mat h = bigru_forward(seq.rows, seq.mask, nullptr, nullptr);
        Vec pooled = pool(h, seq.mask, nullptr);
        Vec hid = relu(affine(dense_, pooled));
        return softmax2_prob1(affine(head_, hid));
    }

    double accumulate_gradients(const NeuralInput& input, int label, bool dropout_on,
                                Rng& rng) override {
        const auto& seq = expect_seq(input);
        Mat dropped_mask;
        Mat x = dropout_apply(seq.rows, spec_.dropout_embed,
                              dropout_on ? DropoutMode::train : DropoutMode::eval, rng,
                              &dropped_mask);
        GruSequenceCache fcache, bcache;
        Mat hf = gru_run(fwd_, x, seq.mask, false, &fcache);
        Mat hb = gru_run(bwd_, x, seq.mask, true, &bcache);
        Mat h(hf.rows(), hf.cols() + hb.cols());
        h << hf, hb;

        AttentionCache att_cache;
        Vec pooled = pool(h, seq.mask, attention_ ? &att_cache : nullptr);
        Vec head_mask;
        Vec pooled_d = dropout_vec(pooled, spec_.dropout_head, dropout_on, rng, &head_mask);
        Vec pre_dense = affine(dense_, pooled_d);
        Vec hid = relu(pre_dense);
        Vec logits = affine(head_, hid);
        auto loss = softmax2_loss(logits, label);

        ghead_.W += loss.dlogits * hid.transpose();
        ghead_.b.col(0) += loss.dlogits;
        Vec dhid = head_.W.transpose() * loss.dlogits;
        Vec dpre = dhid.cwiseProduct(relu_grad_mask(pre_dense));
        gdense_.W += dpre * pooled_d.transpose();
        gdense_.b.col(0) += dpre;
        Vec dpooled_d = dense_.W.transpose() * dpre;
        Vec dpooled = dpooled_d.cwiseProduct(head_mask);

        Mat dh;
        if (attention_) {
            dh = attention_backward(att_, att_cache, dpooled, gatt_);
        } else {
            dh = Mat::Zero(h.rows(), h.cols());
            int count = 0;
            for (char m : seq.mask) count += m ? 1 : 0;
            if (count > 0) {
                for (int t = 0; t < static_cast<int>(seq.mask.size()); ++t) {
                    if (seq.mask[static_cast<std::size_t>(t)]) {
                        dh.row(t) = dpooled.transpose() / static_cast<double>(count);
                    }
                }
            }
        }

        const int hdim = spec_.gru_hidden;
        Mat dhf = dh.leftCols(hdim);
        Mat dhb = dh.rightCols(hdim);
        gru_backprop(fwd_, x, seq.mask, false, fcache, dhf, gfwd_);
        gru_backprop(bwd_, x, seq.mask, true, bcache, dhb, gbwd_);
        // input dropout feeds data rows only; nothing upstream needs dx
        return loss.loss;
    }

private:
    static const EncodedSequence& expect_seq(const NeuralInput& input) {
        const EncodedSequence* seq = std::get_if<EncodedSequence>(&input);
        if (!seq) throw Error("bigru expects an encoded token sequence");
        return *seq;
    }

    Mat bigru_forward(const Mat& x, const std::vector<char>& mask, GruSequenceCache* fc,
                      GruSequenceCache* bc) const {
        Mat hf = gru_run(fwd_, x, mask, false, fc);
        Mat hb = gru_run(bwd_, x, mask, true, bc);
        Mat h(hf.rows(), hf.cols() + hb.cols());
        h << hf, hb;
        return h;
    }

    Vec pool(const Mat& h, const std::vector<char>& mask, AttentionCache* cache) const {
        if (attention_) return attention_pool(att_, h, mask, nullptr, cache);
        Vec pooled = Vec::Zero(h.cols());
        int count = 0;
        for (int t = 0; t < static_cast<int>(mask.size()); ++t) {
            if (mask[static_cast<std::size_t>(t)]) {
                pooled += h.row(t).transpose();
                ++count;
            }
        }
        if (count > 0) pooled /= static_cast<double>(count);
        return pooled;
    }

    bool attention_;
    GruParams fwd_, bwd_;
    AttentionParams att_;
    DenseParams dense_, head_;
    GruGrads gfwd_, gbwd_;
    AttentionGrads gatt_;
    DenseParams gdense_, ghead_;
};

// ---------------------------------------------------------------------------
// Hierarchical attention network
// ---------------------------------------------------------------------------

class HanNet final : public Network {
public:
    explicit HanNet(NetworkSpec spec) : Network(spec) {
        Rng rng(spec.seed);
        const int wh = spec.han_word_hidden;
        const int sh = spec.han_sentence_hidden;
        word_fwd_ = make_gru(wh, spec.input_dim, rng);
        word_bwd_ = make_gru(wh, spec.input_dim, rng);
        word_att_ = make_attention(spec.attention_dim > 0 ? spec.attention_dim : 2 * wh, 2 * wh,
                                   rng);
        sent_fwd_ = make_gru(sh, 2 * wh, rng);
        sent_bwd_ = make_gru(sh, 2 * wh, rng);
        sent_att_ = make_attention(spec.attention_dim > 0 ? spec.attention_dim : 2 * sh, 2 * sh,
                                   rng);
        dense_ = make_dense(spec.han_dense_hidden, 2 * sh, rng);
        head_ = make_dense(1, spec.han_dense_hidden, rng);

        gword_fwd_ = make_gru_grads(word_fwd_);
        gword_bwd_ = make_gru_grads(word_bwd_);
        gword_att_ = make_attention_grads(word_att_);
        gsent_fwd_ = make_gru_grads(sent_fwd_);
        gsent_bwd_ = make_gru_grads(sent_bwd_);
        gsent_att_ = make_attention_grads(sent_att_);
        gdense_ = zero_like(dense_);
        ghead_ = zero_like(head_);
    }

    std::vector<ParamBlock> param_blocks() override {
        std::vector<ParamBlock> blocks;
        register_gru(blocks, "word_gru_fwd", word_fwd_, gword_fwd_);
        register_gru(blocks, "word_gru_bwd", word_bwd_, gword_bwd_);
        register_attention(blocks, "word_attention", word_att_, gword_att_);
        register_gru(blocks, "sentence_gru_fwd", sent_fwd_, gsent_fwd_);
        register_gru(blocks, "sentence_gru_bwd", sent_bwd_, gsent_bwd_);
        register_attention(blocks, "sentence_attention", sent_att_, gsent_att_);
        register_dense(blocks, "dense", dense_, gdense_);
        register_dense(blocks, "head", head_, ghead_);
        return blocks;
    }

    double predict_prob(const NeuralInput& input) const override {
        const auto& batch = expect_batch(input);
        std::vector<const EncodedSequence*> sentences = usable(batch);
        Mat sent_matrix(static_cast<int>(sentences.size()), 2 * spec_.han_word_hidden);
        for (std::size_t s = 0; s < sentences.size(); ++s) {
            Mat hf = gru_run(word_fwd_, sentences[s]->rows, sentences[s]->mask, false, nullptr);
            Mat hb = gru_run(word_bwd_, sentences[s]->rows, sentences[s]->mask, true, nullptr);
            Mat h(hf.rows(), hf.cols() + hb.cols());
            h << hf, hb;
            sent_matrix.row(static_cast<int>(s)) =
                attention_pool(word_att_, h, sentences[s]->mask).transpose();
        }
        std::vector<char> sent_mask(sentences.size(), 1);
        Mat hf = gru_run(sent_fwd_, sent_matrix, sent_mask, false, nullptr);
        Mat hb = gru_run(sent_bwd_, sent_matrix, sent_mask, true, nullptr);
        Mat h(hf.rows(), hf.cols() + hb.cols());
        h << hf, hb;
        Vec doc = attention_pool(sent_att_, h, sent_mask);
        Vec hid = relu(affine(dense_, doc));
        return stable_sigmoid(affine(head_, hid)(0));
    }

    double accumulate_gradients(const NeuralInput& input, int label, bool dropout_on,
                                Rng& rng) override {
        const auto& batch = expect_batch(input);
        std::vector<const EncodedSequence*> sentences = usable(batch);
        const int S = static_cast<int>(sentences.size());
        const int wh = spec_.han_word_hidden;

        std::vector<Mat> word_inputs(static_cast<std::size_t>(S));
        std::vector<GruSequenceCache> wf_cache(static_cast<std::size_t>(S));
        std::vector<GruSequenceCache> wb_cache(static_cast<std::size_t>(S));
        std::vector<Mat> word_states(static_cast<std::size_t>(S));
        std::vector<AttentionCache> watt_cache(static_cast<std::size_t>(S));
        Mat sent_matrix(S, 2 * wh);
        for (int s = 0; s < S; ++s) {
            const auto& seq = *sentences[static_cast<std::size_t>(s)];
            auto us = static_cast<std::size_t>(s);
            word_inputs[us] = dropout_apply(seq.rows, spec_.dropout_embed,
                                            dropout_on ? DropoutMode::train : DropoutMode::eval,
                                            rng, nullptr);
            Mat hf = gru_run(word_fwd_, word_inputs[us], seq.mask, false, &wf_cache[us]);
            Mat hb = gru_run(word_bwd_, word_inputs[us], seq.mask, true, &wb_cache[us]);
            word_states[us] = Mat(hf.rows(), hf.cols() + hb.cols());
            word_states[us] << hf, hb;
            sent_matrix.row(s) =
                attention_pool(word_att_, word_states[us], seq.mask, nullptr, &watt_cache[us])
                    .transpose();
        }

        std::vector<char> sent_mask(static_cast<std::size_t>(S), 1);
        GruSequenceCache sf_cache, sb_cache;
        Mat hf = gru_run(sent_fwd_, sent_matrix, sent_mask, false, &sf_cache);
        Mat hb = gru_run(sent_bwd_, sent_matrix, sent_mask, true, &sb_cache);
        Mat sent_states(hf.rows(), hf.cols() + hb.cols());
        sent_states << hf, hb;
        AttentionCache satt_cache;
        Vec doc = attention_pool(sent_att_, sent_states, sent_mask, nullptr, &satt_cache);
        Vec head_mask;
        Vec doc_d = dropout_vec(doc, spec_.dropout_head, dropout_on, rng, &head_mask);
        Vec pre_dense = affine(dense_, doc_d);
        Vec hid = relu(pre_dense);
        double a = affine(head_, hid)(0);
        double p = stable_sigmoid(a);
        double loss = softplus(a) - static_cast<double>(label) * a;

        // backward
        double da = p - static_cast<double>(label);
        ghead_.W += da * hid.transpose();
        ghead_.b(0, 0) += da;
        Vec dhid = head_.W.transpose() * Vec::Constant(1, da);
        Vec dpre = dhid.cwiseProduct(relu_grad_mask(pre_dense));
        gdense_.W += dpre * doc_d.transpose();
        gdense_.b.col(0) += dpre;
        Vec ddoc_d = dense_.W.transpose() * dpre;
        Vec ddoc = ddoc_d.cwiseProduct(head_mask);

        Mat dsent_states = attention_backward(sent_att_, satt_cache, ddoc, gsent_att_);
        const int sh = spec_.han_sentence_hidden;
        Mat dsf = dsent_states.leftCols(sh);
        Mat dsb = dsent_states.rightCols(sh);
        Mat dsent_matrix = gru_backprop(sent_fwd_, sent_matrix, sent_mask, false, sf_cache, dsf,
                                        gsent_fwd_);
        dsent_matrix += gru_backprop(sent_bwd_, sent_matrix, sent_mask, true, sb_cache, dsb,
                                     gsent_bwd_);

        for (int s = 0; s < S; ++s) {
            auto us = static_cast<std::size_t>(s);
            const auto& seq = *sentences[us];
            Vec dsv = dsent_matrix.row(s).transpose();
            Mat dh = attention_backward(word_att_, watt_cache[us], dsv, gword_att_);
            Mat dhf = dh.leftCols(wh);
            Mat dhb = dh.rightCols(wh);
            gru_backprop(word_fwd_, word_inputs[us], seq.mask, false, wf_cache[us], dhf,
                         gword_fwd_);
            gru_backprop(word_bwd_, word_inputs[us], seq.mask, true, wb_cache[us], dhb,
                         gword_bwd_);
        }
        return loss;
    }

private:
    static const SentenceBatch& expect_batch(const NeuralInput& input) {
        const SentenceBatch* batch = std::get_if<SentenceBatch>(&input);
        if (!batch) throw Error("han expects a sentence batch");
        return *batch;
    }

    std::vector<const EncodedSequence*> usable(const SentenceBatch& batch) const {
        std::vector<const EncodedSequence*> sentences;
        for (const auto& seq : batch) {
            if (seq.true_count() > 0) sentences.push_back(&seq);
        }
        if (sentences.empty()) throw Error("han: input has no usable sentence");
        return sentences;
    }

    GruParams word_fwd_, word_bwd_, sent_fwd_, sent_bwd_;
    AttentionParams word_att_, sent_att_;
    DenseParams dense_, head_;
    GruGrads gword_fwd_, gword_bwd_, gsent_fwd_, gsent_bwd_;
    AttentionGrads gword_att_, gsent_att_;
    DenseParams gdense_, ghead_;
};

double f1_of_predictions(const std::vector<int>& pred, const std::vector<int>& gold) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == 1 && gold[i] == 1) ++tp;
        else if (pred[i] == 1) ++fp;
        else if (gold[i] == 1) ++fn;
    }
    double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace

std::unique_ptr<Network> build_network(const NetworkSpec& spec) {
    if (spec.input_dim <= 0) throw Error("build_network: input_dim must be positive");
    switch (spec.kind) {
        case Architecture::mlp_precomputed: return std::make_unique<MlpNet>(spec);
        case Architecture::bigru: return std::make_unique<BiGruNet>(spec, false);
        case Architecture::bigru_attention: return std::make_unique<BiGruNet>(spec, true);
        case Architecture::han: return std::make_unique<HanNet>(spec);
    }
    throw Error("build_network: unknown architecture");
}

TrainHistory train_network(Network& net, const NeuralDataset& train, const NeuralDataset& val,
                           const TrainConfig& cfg) {
    if (train.inputs.empty() || val.inputs.empty()) throw Error("train_network: empty split");
    if (train.inputs.size() != train.labels.size() || val.inputs.size() != val.labels.size()) {
        throw Error("train_network: inputs/labels mismatch");
    }

    Rng shuffle_rng(cfg.seed);
    Rng dropout_rng(derive_seed(cfg.seed, 0x9d));
    AdamState adam;

    auto blocks = net.param_blocks();
    std::vector<Mat*> values;
    std::vector<const Mat*> grads;
    for (auto& b : blocks) {
        values.push_back(b.value);
        grads.push_back(b.grad);
    }

    TrainHistory history;
    std::vector<Mat> best = net.snapshot_params();
    int bad_epochs = 0;

    std::vector<std::size_t> order(train.inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(),
                                       start + static_cast<std::size_t>(cfg.batch_size));
            net.zero_gradients();
            for (std::size_t i = start; i < end; ++i) {
                loss_sum += net.accumulate_gradients(train.inputs[order[i]],
                                                     train.labels[order[i]], true, dropout_rng);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (auto& b : blocks) *b.grad *= inv;
            adam_step(values, grads, adam, cfg.lr);
        }

        std::vector<int> preds;
        preds.reserve(val.inputs.size());
        for (const auto& input : val.inputs) {
            preds.push_back(net.predict_prob(input) > 0.5 ? 1 : 0);
        }
        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(train.inputs.size());
        stats.val_f1 = f1_of_predictions(preds, val.labels);
        history.epochs.push_back(stats);

        if (stats.val_f1 > history.best_val_f1) {
            history.best_val_f1 = stats.val_f1;
            history.best_epoch = epoch;
            best = net.snapshot_params();
            bad_epochs = 0;
        } else {
            ++bad_epochs;
        }
        if (bad_epochs >= cfg.patience) break;
    }

    net.restore_params(best);
    return history;
}

double gradient_check(Network& net, const NeuralInput& input, int label, double h,
                      std::uint64_t seed, int min_coords) {
    Rng dummy(0);
    net.zero_gradients();
    net.accumulate_gradients(input, label, false, dummy);

    auto blocks = net.param_blocks();
    std::vector<Mat> analytic;
    for (auto& b : blocks) analytic.push_back(*b.grad);

    Rng pick(seed);
    const int per_block = std::max(1, (min_coords + static_cast<int>(blocks.size()) - 1) /
                                          static_cast<int>(blocks.size()));
    double max_rel = 0.0;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        Mat& theta = *blocks[bi].value;
        const auto size = static_cast<std::size_t>(theta.size());
        auto coords = pick.sample_indices(size, std::min<std::size_t>(
                                                    static_cast<std::size_t>(per_block), size));
        for (auto coord : coords) {
            double* cell = theta.data() + coord;
            const double original = *cell;
            *cell = original + h;
            net.zero_gradients();
            double plus = net.accumulate_gradients(input, label, false, dummy);
            *cell = original - h;
            net.zero_gradients();
            double minus = net.accumulate_gradients(input, label, false, dummy);
            *cell = original;
            double numeric = (plus - minus) / (2.0 * h);
            double exact = analytic[bi].data()[coord];
            // relative error with a magnitude floor, so finite-difference
            // noise on near-zero gradients does not dominate
            double denom = std::max({std::abs(numeric), std::abs(exact), 1e-4});
            max_rel = std::max(max_rel, std::abs(numeric - exact) / denom);
        }
    }
    net.zero_gradients();
    return max_rel;
}

Prediction predict_network(const Network& net, const NeuralInput& input) {
    double score = net.predict_prob(input);
    return {score > 0.5 ? 1 : 0, score};
}

}  // namespace probdet
