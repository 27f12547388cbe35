#pragma once

#include "probdet/embeddings.hpp"
#include "probdet/linear_models.hpp"
#include "probdet/neural/layers.hpp"
#include "probdet/neural/tensor.hpp"
#include "probdet/rng.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace probdet {

enum class Architecture { mlp_precomputed, bigru, bigru_attention, han };
enum class OutputHead { softmax2, sigmoid1 };

// Layer sizes below are decisions, not paper values; override per run.
struct NetworkSpec {
    Architecture kind = Architecture::bigru;
    int input_dim = 0;  // embedding dim for sequence models, 768 for the MLP

    int mlp_hidden1 = 256;
    int mlp_hidden2 = 64;

    int gru_hidden = 64;   // per direction (bigru kinds)
    int dense_hidden = 64;

    int han_word_hidden = 50;      // per direction
    int han_sentence_hidden = 50;  // per direction
    int han_dense_hidden = 100;

    // 0 = match the recurrent state width (2 * hidden per direction)
    int attention_dim = 0;

    double dropout_embed = 0.4;  // before the recurrence / first hidden layer
    double dropout_head = 0.3;   // before the dense head

    int max_len = 25;
    int max_sentences = 6;
    std::uint64_t seed = 0;

    OutputHead head() const {
        return kind == Architecture::han ? OutputHead::sigmoid1 : OutputHead::softmax2;
    }
};

using NeuralInput = std::variant<Vec, EncodedSequence, SentenceBatch>;

struct ParamBlock {
    std::string name;
    Mat* value;
    Mat* grad;
};

class Network {
public:
    virtual ~Network() = default;

    const NetworkSpec& spec() const { return spec_; }

    // Every learnable tensor, in a fixed order.
    virtual std::vector<ParamBlock> param_blocks() = 0;

    // Probability of class 1 with dropout disabled.
    virtual double predict_prob(const NeuralInput& input) const = 0;

    // Forward + backward for one sample; adds into the gradient buffers and
    // returns the per-sample loss.
    virtual double accumulate_gradients(const NeuralInput& input, int label, bool dropout_on,
                                        Rng& rng) = 0;

    void zero_gradients();
    std::vector<Mat> snapshot_params();
    void restore_params(const std::vector<Mat>& snapshot);
    std::int64_t parameter_count();

protected:
    explicit Network(NetworkSpec spec) : spec_(spec) {}
    NetworkSpec spec_;
};

std::unique_ptr<Network> build_network(const NetworkSpec& spec);

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 30;
    double lr = 1e-3;
    int patience = 5;
    std::uint64_t seed = 0;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_f1 = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_f1 = -1.0;
};

struct NeuralDataset {
    std::vector<NeuralInput> inputs;
    std::vector<int> labels;
};

// Minibatch Adam with per-epoch seeded shuffling and early stopping on
// validation f1; the network is left holding the best-validation
// parameters.
TrainHistory train_network(Network& net, const NeuralDataset& train, const NeuralDataset& val,
                           const TrainConfig& cfg);

// Central-difference check of every parameter block (dropout disabled);
// returns the max relative error over >= min_coords sampled coordinates.
double gradient_check(Network& net, const NeuralInput& input, int label, double h = 1e-5,
                      std::uint64_t seed = 0, int min_coords = 200);

// label = 1 iff score > 0.5 (exact 0.5 goes to class 0).
Prediction predict_network(const Network& net, const NeuralInput& input);

}  // namespace probdet
