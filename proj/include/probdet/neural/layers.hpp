#pragma once

#include "probdet/neural/tensor.hpp"
#include "probdet/rng.hpp"

#include <vector>

namespace probdet {

enum class Activation { identity, relu, tanh_act };

// Affine weights of a hidden or output layer; b is (out x 1).
struct DenseParams {
    Mat W;
    Mat b;
};

struct DenseCache {
    Mat x;    // input rows
    Mat pre;  // pre-activation
};

// Batch forward over row vectors: y = act(x W^T + 1 b^T).
Mat dense_apply(const Mat& x, const DenseParams& p, Activation act);

Mat dense_forward(const Mat& x, const DenseParams& p, Activation act, DenseCache* cache);

// Exact chain rule: returns dX and accumulates dW/db.
Mat dense_backward(const Mat& dy, const DenseParams& p, Activation act, const DenseCache& cache,
                   Mat& dW, Mat& db);

enum class DropoutMode { train, eval };

// Inverted dropout: zero with probability p_drop and scale survivors by
// 1/(1-p_drop) in train mode; identity in eval mode. The survivor mask is
// written to mask_out when given (needed for the backward pass).
Mat dropout_apply(const Mat& x, double p_drop, DropoutMode mode, Rng& rng, Mat* mask_out = nullptr);

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

// Gate parameters: z (update), r (reset), h (candidate). W* act on the
// input, U* on the previous hidden state.
struct GruParams {
    Mat Wz, Uz, Wr, Ur, Wh, Uh;
    Mat bz, br, bh;  // (h x 1)

    int hidden() const { return static_cast<int>(Wz.rows()); }
    int input_dim() const { return static_cast<int>(Wz.cols()); }
};

// z = sigmoid(Wz x + Uz h + bz), r likewise,
// hc = tanh(Wh x + Uh (r .* h) + bh), h' = (1-z) .* h + z .* hc
Vec gru_step(const GruParams& p, const Vec& x, const Vec& h_prev);

struct GruStepCache {
    Vec x, h_prev, z, r, hc;
};

Vec gru_step_cached(const GruParams& p, const Vec& x, const Vec& h_prev, GruStepCache& cache);

struct GruGrads {
    Mat dWz, dUz, dWr, dUr, dWh, dUh;
    Mat dbz, dbr, dbh;
};

GruGrads make_gru_grads(const GruParams& p);

// One BPTT step: consumes d(h_t), emits d(h_{t-1}) and d(x_t), accumulating
// parameter gradients.
Vec gru_step_backward(const GruParams& p, const GruStepCache& cache, const Vec& dh,
                      GruGrads& grads, Vec& dx);

struct GruSequenceCache {
    std::vector<GruStepCache> steps;  // one per unmasked position, in scan order
    std::vector<int> positions;       // original time indices of those steps
};

// Runs the cell across the unmasked positions of `inputs` (T x d); masked
// steps carry the hidden state through unchanged and keep the carried state
// as their output row. reverse=true scans right to left.
Mat gru_run(const GruParams& p, const Mat& inputs, const std::vector<char>& mask, bool reverse,
            GruSequenceCache* cache);

// Backward through gru_run given d(states) (T x h); returns d(inputs).
Mat gru_backprop(const GruParams& p, const Mat& inputs, const std::vector<char>& mask,
                 bool reverse, const GruSequenceCache& cache, const Mat& dstates,
                 GruGrads& grads);

enum class GruDirection { forward, backward, bidirectional };

// Convenience wrapper; bidirectional concatenates forward and backward
// states per timestep.
Mat gru_sequence(const GruParams& fwd, const GruParams* bwd, const Mat& inputs,
                 const std::vector<char>& mask, GruDirection direction);

// ---------------------------------------------------------------------------
// Attention pooling
// ---------------------------------------------------------------------------

struct AttentionParams {
    Mat Wa;     // att x state
    Mat ba;     // att x 1
    Mat u_ctx;  // att x 1
};

struct AttentionCache {
    Mat h;
    std::vector<char> mask;
    Mat proj;     // T x att, tanh projections
    Vec weights;  // softmax over unmasked positions (0 elsewhere)
};

// u_i = tanh(Wa h_i + ba); scores u_ctx . u_i; softmax over unmasked
// positions; context = sum_i weight_i h_i. Throws when every position is
// masked.
Vec attention_pool(const AttentionParams& p, const Mat& h, const std::vector<char>& mask,
                   Vec* weights_out = nullptr, AttentionCache* cache = nullptr);

struct AttentionGrads {
    Mat dWa, dba, du_ctx;
};

AttentionGrads make_attention_grads(const AttentionParams& p);

// Returns dH given d(context).
Mat attention_backward(const AttentionParams& p, const AttentionCache& cache,
                       const Vec& dcontext, AttentionGrads& grads);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Classic bias-corrected update for one tensor; t is the 1-based step count.
void adam_update(Mat& theta, const Mat& grad, Mat& m, Mat& v, long t, double lr,
                 const AdamConfig& cfg = {});

// Moments per parameter block plus the shared step counter.
struct AdamState {
    std::vector<Mat> m, v;
    long t = 0;
};

void adam_step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads,
               AdamState& state, double lr, const AdamConfig& cfg = {});

}  // namespace probdet
