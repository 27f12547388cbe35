#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace probdet {

// One (comment, rater) tag as pulled from the review platform export.
struct RawTagRecord {
    std::string comment_id;
    std::string submission_id;
    std::string tagger_id;
    std::string text;
    int tag = 0;  // 1 = rater says the comment detects a problem
};

struct LabeledComment {
    std::string id;
    std::string text;
    int label = 0;
};

// Counts dropped at each curation stage, emitted as the curation log.
struct CurationCounts {
    std::int64_t input_records = 0;
    std::int64_t conflicts_dropped = 0;
    std::int64_t duplicates_dropped = 0;
    std::int64_t downsampled_dropped = 0;
    std::int64_t final_count = 0;
};

struct Corpus {
    std::vector<LabeledComment> items;
    CurationCounts provenance;

    std::array<std::int64_t, 2> class_counts() const;
};

// Parses JSON Lines {comment_id, submission_id, tagger_id, text, tag}.
// Malformed lines and field violations raise Error naming the line number.
std::vector<RawTagRecord> ingest(std::istream& stream);

// Keeps single-tag comments as-is and unanimously multi-tagged comments
// once; comments whose raters disagree are dropped and counted.
std::pair<std::vector<LabeledComment>, std::int64_t> consolidate(
    const std::vector<RawTagRecord>& records);

// Collapses items sharing a dedup key (case-folded, punctuation-stripped,
// whitespace-collapsed text) onto the first occurrence. Keys observed with
// both labels have all their items dropped.
Corpus deduplicate(const Corpus& corpus);

// Samples the majority class down to the minority count without
// replacement; survivor order is preserved.
Corpus downsample(const Corpus& corpus, std::uint64_t seed);

struct SplitAssignment {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

// Stratified train/validation/test split. Part sizes are
// floor(ratio * N) for test and validation with train taking the
// remainder; per-class seat allocation uses largest fractional remainder
// so each part's class mix stays within one item of the corpus mix.
SplitAssignment split(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed);

struct FoldPlan {
    int k = 0;
    std::vector<std::vector<std::string>> folds;
};

// Stratified k folds with sizes differing by at most one; per-class extras
// go to the currently smallest folds so totals stay balanced.
FoldPlan make_folds(const Corpus& corpus, int k, std::uint64_t seed);

// Synthetic benchmark corpus: n/2 problem-flavored positives, n/2
// praise-flavored negatives, with a `noise` fraction of labels flipped.
Corpus generate_synthetic(int n, double noise, std::uint64_t seed);

// Word lists planted by generate_synthetic, exposed for coefficient checks.
const std::vector<std::string>& synthetic_problem_lexicon();
const std::vector<std::string>& synthetic_praise_lexicon();

// Curated corpus file format: JSON Lines {id, text, label}.
Corpus read_corpus_jsonl(std::istream& stream);
std::string corpus_to_jsonl(const Corpus& corpus);

// FNV-1a digest over (id, text, label) in item order.
std::string corpus_digest(const Corpus& corpus);

}  // namespace probdet
