#include "probdet/text_features.hpp"

#include "probdet/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace probdet {

namespace {

bool is_token_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char fold(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

TokenSequence tokenize(std::string_view text) {
    TokenSequence tokens;
    std::string current;
    for (char c : text) {
        if (is_token_char(c)) {
            current.push_back(fold(c));
        } else if (!current.empty()) {
            if (current.size() >= 2) tokens.push_back(current);
            current.clear();
        }
    }
    if (current.size() >= 2) tokens.push_back(current);
    return tokens;
}

std::vector<std::string> extract_ngrams(const TokenSequence& tokens, NgramRange range) {
    if (range.low < 1 || range.low > range.high) throw Error("invalid n-gram range");
    std::vector<std::string> grams;
    for (int n = range.low; n <= range.high; ++n) {
        if (tokens.size() < static_cast<std::size_t>(n)) break;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (int j = 1; j < n; ++j) {
                gram += ' ';
                gram += tokens[i + j];
            }
            grams.push_back(std::move(gram));
        }
    }
    return grams;
}

std::optional<std::int32_t> Vocabulary::lookup(const std::string& term) const {
    auto it = index.find(term);
    if (it == index.end()) return std::nullopt;
    return it->second;
}

Vocabulary fit_vocabulary(const std::vector<TokenSequence>& docs, NgramRange range) {
    if (docs.empty()) throw Error("fit_vocabulary requires at least one document");
    std::set<std::string> seen;
    for (const auto& doc : docs) {
        for (auto& gram : extract_ngrams(doc, range)) seen.insert(std::move(gram));
    }
    if (seen.empty()) throw Error("empty vocabulary: no terms in any document");
    Vocabulary vocab;
    vocab.ngram_range = range;
    vocab.terms.assign(seen.begin(), seen.end());  // std::set iterates lexicographically
    vocab.index.reserve(vocab.terms.size());
    for (std::int32_t i = 0; i < vocab.size(); ++i) vocab.index.emplace(vocab.terms[i], i);
    return vocab;
}

SparseVector vectorize_counts(const TokenSequence& doc, const Vocabulary& vocab) {
    if (vocab.size() == 0) throw Error("vectorize_counts requires a non-empty vocabulary");
    std::vector<std::pair<std::int32_t, double>> hits;
    for (const auto& gram : extract_ngrams(doc, vocab.ngram_range)) {
        if (auto idx = vocab.lookup(gram)) hits.emplace_back(*idx, 1.0);
    }
    std::sort(hits.begin(), hits.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    SparseVector counts;
    counts.dim = vocab.size();
    for (const auto& [idx, one] : hits) {
        if (!counts.entries.empty() && counts.entries.back().first == idx) {
            counts.entries.back().second += one;
        } else {
            counts.push(idx, one);
        }
    }
    return counts;
}

TfidfModel fit_idf(const std::vector<SparseVector>& count_matrix, std::int64_t n_docs,
                   std::int32_t vocab_size) {
    if (n_docs < 1) throw Error("fit_idf requires N >= 1");
    std::vector<std::int64_t> df(static_cast<std::size_t>(vocab_size), 0);
    for (const auto& row : count_matrix) {
        for (const auto& [idx, value] : row.entries) {
            if (value != 0.0) ++df[static_cast<std::size_t>(idx)];
        }
    }
    TfidfModel model;
    model.document_count = n_docs;
    model.idf.resize(static_cast<std::size_t>(vocab_size));
    for (std::size_t t = 0; t < model.idf.size(); ++t) {
        model.idf[t] = std::log((1.0 + static_cast<double>(n_docs)) /
                                (1.0 + static_cast<double>(df[t]))) +
                       1.0;
    }
    return model;
}

SparseVector transform_tfidf(const SparseVector& counts, const TfidfModel& model) {
    if (static_cast<std::size_t>(counts.dim) != model.idf.size()) {
        throw Error("transform_tfidf: dimension mismatch");
    }
    SparseVector weighted;
    weighted.dim = counts.dim;
    for (const auto& [idx, value] : counts.entries) {
        weighted.push(idx, value * model.idf[static_cast<std::size_t>(idx)]);
    }
    double norm = weighted.l2_norm();
    if (norm > 0.0) {
        for (auto& [idx, value] : weighted.entries) value /= norm;
    }
    return weighted;
}

}  // namespace probdet
