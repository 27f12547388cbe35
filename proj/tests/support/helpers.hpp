#pragma once

#include "probdet/corpus.hpp"
#include "probdet/embeddings.hpp"
#include "probdet/rng.hpp"
#include "probdet/sparse.hpp"
#include "probdet/text_features.hpp"

#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace testsupport {

// tokenize + fit vocab/idf + tf-idf transform in one go
struct Featurized {
    probdet::Vocabulary vocab;
    probdet::TfidfModel tfidf;
    std::vector<probdet::SparseVector> X;
    std::vector<int> y;
};

inline Featurized featurize(const std::vector<std::pair<std::string, int>>& docs,
                            probdet::NgramRange range = {1, 1}) {
    Featurized out;
    std::vector<probdet::TokenSequence> tokens;
    for (const auto& [text, label] : docs) {
        tokens.push_back(probdet::tokenize(text));
        out.y.push_back(label);
    }
    out.vocab = probdet::fit_vocabulary(tokens, range);
    std::vector<probdet::SparseVector> counts;
    for (const auto& doc : tokens) counts.push_back(probdet::vectorize_counts(doc, out.vocab));
    out.tfidf = probdet::fit_idf(counts, static_cast<std::int64_t>(counts.size()),
                                 out.vocab.size());
    for (const auto& c : counts) out.X.push_back(probdet::transform_tfidf(c, out.tfidf));
    return out;
}

// Linearly separable toy corpus: the two classes use disjoint tokens.
inline std::vector<std::pair<std::string, int>> separable_docs() {
    return {
        {"missing tests entirely", 1},   {"however results wrong", 1},
        {"missing sections however", 1}, {"wrong tests missing", 1},
        {"great work overall", 0},       {"clearly explained nicely", 0},
        {"great sections nicely", 0},    {"overall clearly great", 0},
    };
}

// Deterministic word vectors over a corpus vocabulary.
inline probdet::EmbeddingTable toy_embeddings(const probdet::Corpus& corpus, int dim,
                                              std::uint64_t seed) {
    std::set<std::string> words;
    for (const auto& item : corpus.items) {
        for (const auto& token : probdet::tokenize(item.text)) words.insert(token);
    }
    probdet::EmbeddingTable table;
    table.dim = dim;
    probdet::Rng rng(seed);
    for (const auto& word : words) {
        std::vector<double> v(static_cast<std::size_t>(dim));
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        table.vectors.emplace(word, std::move(v));
    }
    return table;
}

inline probdet::Corpus corpus_from_docs(const std::vector<std::pair<std::string, int>>& docs) {
    probdet::Corpus corpus;
    int i = 0;
    for (const auto& [text, label] : docs) {
        corpus.items.push_back({"doc-" + std::to_string(i++), text, label});
    }
    return corpus;
}

}  // namespace testsupport
