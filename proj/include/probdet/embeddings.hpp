#pragma once

#include "probdet/neural/tensor.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace probdet {

// Token -> dense vector, dimension inferred from the first line of the
// GloVe-format file.
struct EmbeddingTable {
    std::unordered_map<std::string, std::vector<double>> vectors;
    int dim = 0;

    bool empty() const { return vectors.empty(); }
};

// GloVe text format: token followed by d space-separated decimals per line.
// Later duplicate tokens overwrite earlier ones.
EmbeddingTable load_glove(std::istream& stream);

// Bit-exact inverse of load_glove for finite decimal inputs.
std::string glove_to_text(const EmbeddingTable& table);

// Externally produced 768-d vectors keyed by comment id (JSON Lines
// {id, vector}).
struct PrecomputedVectors {
    static constexpr int kDim = 768;
    std::unordered_map<std::string, std::vector<double>> by_id;
};

PrecomputedVectors load_precomputed(std::istream& stream);

// Splits on '.', '!' or '?' followed by whitespace or end of text; keeps
// the terminator with its sentence; drops empty fragments. Text without a
// terminator is a single sentence.
std::vector<std::string> split_sentences(std::string_view text);

// Fixed-length encoding of one token sequence: rows is max_len x d, mask
// marks real tokens. Out-of-vocabulary tokens keep a true mask over a zero
// row; padding rows are zero with a false mask.
struct EncodedSequence {
    Mat rows;
    std::vector<char> mask;

    int length() const { return static_cast<int>(mask.size()); }
    int true_count() const;
};

EncodedSequence encode_sequence(std::string_view text, const EmbeddingTable& table,
                                int max_len = 25);

// Per-sentence encodings for the hierarchical model; at most max_sentences
// sentences, each capped at max_len words.
using SentenceBatch = std::vector<EncodedSequence>;

SentenceBatch encode_sentences(std::string_view text, const EmbeddingTable& table,
                               int max_len = 25, int max_sentences = 6);

}  // namespace probdet
