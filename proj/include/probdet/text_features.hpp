#pragma once

#include "probdet/sparse.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace probdet {

using TokenSequence = std::vector<std::string>;

// Case-folded maximal runs of ASCII alphanumerics, length >= 2. Everything
// else (punctuation, single characters, non-ASCII bytes) is a separator.
TokenSequence tokenize(std::string_view text);

struct NgramRange {
    int low = 1;
    int high = 2;
    bool operator==(const NgramRange&) const = default;
};

// Contiguous n-grams for every n in [low, high], space-joined, in document
// order (all n-grams of size low first, then low+1, ...).
std::vector<std::string> extract_ngrams(const TokenSequence& tokens, NgramRange range);

// Term -> dense column index, indices assigned by lexicographic term order.
struct Vocabulary {
    std::vector<std::string> terms;  // terms[i] has index i
    std::unordered_map<std::string, std::int32_t> index;
    NgramRange ngram_range;

    std::int32_t size() const { return static_cast<std::int32_t>(terms.size()); }
    std::optional<std::int32_t> lookup(const std::string& term) const;
};

// All n-grams across docs; throws if no document yields any term.
Vocabulary fit_vocabulary(const std::vector<TokenSequence>& docs, NgramRange range);

// Occurrence counts of in-vocabulary n-grams; unseen terms ignored.
SparseVector vectorize_counts(const TokenSequence& doc, const Vocabulary& vocab);

struct TfidfModel {
    std::vector<double> idf;  // per-column weights, idf(t) = ln((1+N)/(1+df)) + 1
    std::int64_t document_count = 0;
};

TfidfModel fit_idf(const std::vector<SparseVector>& count_matrix, std::int64_t n_docs,
                   std::int32_t vocab_size);

// count * idf followed by L2 normalization; the zero vector stays zero.
SparseVector transform_tfidf(const SparseVector& counts, const TfidfModel& model);

}  // namespace probdet
