#include "probdet/corpus.hpp"

#include "probdet/error.hpp"
#include "probdet/io_util.hpp"
#include "probdet/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace probdet {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r\n\f\v");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n\f\v");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
    throw Error("line " + std::to_string(line_no) + ": " + what);
}

std::string require_string(const json& j, const char* field, std::size_t line_no) {
    auto it = j.find(field);
    if (it == j.end()) fail_line(line_no, std::string("missing field '") + field + "'");
    if (!it->is_string()) fail_line(line_no, std::string("field '") + field + "' must be a string");
    return it->get<std::string>();
}

}  // namespace

std::array<std::int64_t, 2> Corpus::class_counts() const {
    std::array<std::int64_t, 2> counts{0, 0};
    for (const auto& item : items) counts[static_cast<std::size_t>(item.label)] += 1;
    return counts;
}

std::vector<RawTagRecord> ingest(std::istream& stream) {
    std::vector<RawTagRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) fail_line(line_no, "malformed JSON");
        if (!j.is_object()) fail_line(line_no, "expected a JSON object");

        RawTagRecord rec;
        rec.comment_id = require_string(j, "comment_id", line_no);
        rec.submission_id = require_string(j, "submission_id", line_no);
        rec.tagger_id = require_string(j, "tagger_id", line_no);
        rec.text = require_string(j, "text", line_no);

        auto tag_it = j.find("tag");
        if (tag_it == j.end()) fail_line(line_no, "missing field 'tag'");
        if (!tag_it->is_number_integer()) fail_line(line_no, "field 'tag' must be 0 or 1");
        std::int64_t tag = tag_it->get<std::int64_t>();
        if (tag != 0 && tag != 1) fail_line(line_no, "field 'tag' must be 0 or 1");
        rec.tag = static_cast<int>(tag);

        if (rec.comment_id.empty()) fail_line(line_no, "comment_id must be non-empty");
        if (rec.tagger_id.empty()) fail_line(line_no, "tagger_id must be non-empty");
        if (trim(rec.text).empty()) fail_line(line_no, "text must be non-empty");
        records.push_back(std::move(rec));
    }
    return records;
}

std::pair<std::vector<LabeledComment>, std::int64_t> consolidate(
    const std::vector<RawTagRecord>& records) {
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<const RawTagRecord*>> by_comment;
    for (const auto& rec : records) {
        auto [it, inserted] = by_comment.try_emplace(rec.comment_id);
        if (inserted) order.push_back(rec.comment_id);
        it->second.push_back(&rec);
    }

    std::vector<LabeledComment> kept;
    std::int64_t conflicts = 0;
    for (const auto& id : order) {
        const auto& tags = by_comment[id];
        bool unanimous = std::all_of(tags.begin(), tags.end(),
                                     [&](const RawTagRecord* r) { return r->tag == tags[0]->tag; });
        if (unanimous) {
            kept.push_back({id, tags[0]->text, tags[0]->tag});
        } else {
            ++conflicts;
        }
    }
    return {std::move(kept), conflicts};
}

namespace {

// Case-folded, punctuation-stripped, whitespace-collapsed text. "Good job."
// and "good  job" share a key.
std::string dedup_key(std::string_view text) {
    std::string key;
    bool pending_space = false;
    for (char c : text) {
        bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        if (alnum) {
            if (pending_space && !key.empty()) key.push_back(' ');
            pending_space = false;
            key.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
        } else {
            pending_space = true;
        }
    }
    return key;
}

}  // namespace

Corpus deduplicate(const Corpus& corpus) {
    struct KeyInfo {
        bool saw_label[2] = {false, false};
    };
    std::unordered_map<std::string, KeyInfo> keys;
    std::vector<std::string> item_keys;
    item_keys.reserve(corpus.items.size());
    for (const auto& item : corpus.items) {
        std::string key = dedup_key(item.text);
        keys[key].saw_label[static_cast<std::size_t>(item.label)] = true;
        item_keys.push_back(std::move(key));
    }

    Corpus out;
    out.provenance = corpus.provenance;
    std::unordered_set<std::string> emitted;
    for (std::size_t i = 0; i < corpus.items.size(); ++i) {
        const auto& info = keys[item_keys[i]];
        if (info.saw_label[0] && info.saw_label[1]) {
            out.provenance.duplicates_dropped += 1;  // conflicting key: drop every item
            continue;
        }
        if (!emitted.insert(item_keys[i]).second) {
            out.provenance.duplicates_dropped += 1;
            continue;
        }
        out.items.push_back(corpus.items[i]);
    }
    out.provenance.final_count = static_cast<std::int64_t>(out.items.size());
    return out;
}

Corpus downsample(const Corpus& corpus, std::uint64_t seed) {
    auto counts = corpus.class_counts();
    if (counts[0] == 0 || counts[1] == 0) {
        throw Error("downsample requires both classes present");
    }
    int majority = counts[1] > counts[0] ? 1 : 0;
    std::int64_t keep = std::min(counts[0], counts[1]);

    std::vector<std::size_t> majority_positions;
    for (std::size_t i = 0; i < corpus.items.size(); ++i) {
        if (corpus.items[i].label == majority) majority_positions.push_back(i);
    }

    Rng rng(seed);
    auto chosen = rng.sample_indices(majority_positions.size(), static_cast<std::size_t>(keep));
    std::unordered_set<std::size_t> survivors;
    for (auto c : chosen) survivors.insert(majority_positions[c]);

    Corpus out;
    out.provenance = corpus.provenance;
    for (std::size_t i = 0; i < corpus.items.size(); ++i) {
        if (corpus.items[i].label == majority && !survivors.count(i)) {
            out.provenance.downsampled_dropped += 1;
            continue;
        }
        out.items.push_back(corpus.items[i]);
    }
    out.provenance.final_count = static_cast<std::int64_t>(out.items.size());
    return out;
}

namespace {

// Seats for one part, allocated to classes by largest fractional remainder
// of the proportional share, capped by availability. Ties favor class 0.
std::array<std::int64_t, 2> apportion(std::int64_t part_size,
                                      std::array<std::int64_t, 2> class_totals,
                                      std::int64_t corpus_size,
                                      std::array<std::int64_t, 2> available) {
    std::array<std::int64_t, 2> quota{};
    std::array<double, 2> remainder{};
    std::int64_t assigned = 0;
    for (int c = 0; c < 2; ++c) {
        double share = static_cast<double>(part_size) * static_cast<double>(class_totals[c]) /
                       static_cast<double>(corpus_size);
        quota[c] = std::min(static_cast<std::int64_t>(std::floor(share)), available[c]);
        remainder[c] = share - std::floor(share);
        assigned += quota[c];
    }
    while (assigned < part_size) {
        int pick = -1;
        for (int c = 0; c < 2; ++c) {
            if (quota[c] >= available[c]) continue;
            if (pick < 0 || remainder[c] > remainder[pick]) pick = c;
        }
        if (pick < 0) break;  // nothing left anywhere
        quota[pick] += 1;
        remainder[pick] = -1.0;
        ++assigned;
    }
    return quota;
}

std::array<std::vector<std::string>, 2> shuffled_ids_by_class(const Corpus& corpus, Rng& rng) {
    std::array<std::vector<std::string>, 2> ids;
    for (const auto& item : corpus.items) {
        ids[static_cast<std::size_t>(item.label)].push_back(item.id);
    }
    rng.shuffle(ids[0]);
    rng.shuffle(ids[1]);
    return ids;
}

}  // namespace

SplitAssignment split(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed) {
    for (double r : ratios) {
        if (r <= 0.0) throw Error("split ratios must be positive");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
        throw Error("split ratios must sum to 1");
    }
    const std::int64_t n = static_cast<std::int64_t>(corpus.items.size());
    if (n < 3) throw Error("split requires at least 3 items");

    const std::int64_t n_test = static_cast<std::int64_t>(
        std::floor(ratios[2] * static_cast<double>(n)));
    const std::int64_t n_val = static_cast<std::int64_t>(
        std::floor(ratios[1] * static_cast<double>(n)));

    Rng rng(seed);
    auto ids = shuffled_ids_by_class(corpus, rng);
    auto counts = corpus.class_counts();
    std::array<std::int64_t, 2> cursor{0, 0};
    std::array<std::int64_t, 2> available{counts[0], counts[1]};

    SplitAssignment out;
    auto take = [&](std::vector<std::string>& part, std::array<std::int64_t, 2> quota) {
        for (int c = 0; c < 2; ++c) {
            for (std::int64_t i = 0; i < quota[c]; ++i) {
                part.push_back(ids[static_cast<std::size_t>(c)]
                                  [static_cast<std::size_t>(cursor[c]++)]);
            }
            available[c] -= quota[c];
        }
    };
    take(out.test, apportion(n_test, counts, n, available));
    take(out.validation, apportion(n_val, counts, n, available));
    take(out.train, available);
    return out;
}

FoldPlan make_folds(const Corpus& corpus, int k, std::uint64_t seed) {
    const std::int64_t n = static_cast<std::int64_t>(corpus.items.size());
    if (k < 2) throw Error("make_folds requires k >= 2");
    if (static_cast<std::int64_t>(k) > n) throw Error("make_folds requires k <= corpus size");

    Rng rng(seed);
    auto ids = shuffled_ids_by_class(corpus, rng);

    FoldPlan plan;
    plan.k = k;
    plan.folds.assign(static_cast<std::size_t>(k), {});
    std::vector<std::int64_t> totals(static_cast<std::size_t>(k), 0);

    for (int c = 0; c < 2; ++c) {
        const auto& class_ids = ids[static_cast<std::size_t>(c)];
        const std::int64_t m = static_cast<std::int64_t>(class_ids.size());
        std::vector<std::int64_t> quota(static_cast<std::size_t>(k), m / k);
        std::int64_t extras = m % k;
        // Extras go to the currently smallest folds so overall sizes stay
        // within one of each other.
        std::vector<int> fold_order(static_cast<std::size_t>(k));
        std::iota(fold_order.begin(), fold_order.end(), 0);
        std::stable_sort(fold_order.begin(), fold_order.end(),
                         [&](int a, int b) { return totals[static_cast<std::size_t>(a)] <
                                                    totals[static_cast<std::size_t>(b)]; });
        for (std::int64_t e = 0; e < extras; ++e) {
            quota[static_cast<std::size_t>(fold_order[static_cast<std::size_t>(e)])] += 1;
        }
        std::size_t cursor = 0;
        for (int f = 0; f < k; ++f) {
            for (std::int64_t i = 0; i < quota[static_cast<std::size_t>(f)]; ++i) {
                plan.folds[static_cast<std::size_t>(f)].push_back(class_ids[cursor++]);
            }
            totals[static_cast<std::size_t>(f)] += quota[static_cast<std::size_t>(f)];
        }
    }
    return plan;
}

namespace {

const std::vector<std::string> kProblemLexicon = {"not",  "but",  "however", "missing",
                                                  "should", "could", "more",    "no"};
const std::vector<std::string> kPraiseLexicon = {"yes", "good", "well", "great", "clearly",
                                                 "passed"};
const std::vector<std::string> kFillerLexicon = {
    "the",     "code",   "tests",  "readme", "section", "design", "document",
    "review",  "project", "team",  "page",   "method",  "class",  "table",
    "result",  "report", "detail", "example", "point",  "part"};

std::string pick(const std::vector<std::string>& words, Rng& rng) {
    return words[static_cast<std::size_t>(rng.below(words.size()))];
}

std::string synth_sentence(bool positive, Rng& rng) {
    // 4..8 filler words with 1..2 lexicon words spliced in.
    std::size_t n_filler = 4 + static_cast<std::size_t>(rng.below(5));
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n_filler; ++i) words.push_back(pick(kFillerLexicon, rng));
    std::size_t n_signal = 1 + static_cast<std::size_t>(rng.below(2));
    const auto& lexicon = positive ? kProblemLexicon : kPraiseLexicon;
    for (std::size_t i = 0; i < n_signal; ++i) {
        std::size_t pos = static_cast<std::size_t>(rng.below(words.size() + 1));
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), pick(lexicon, rng));
    }
    std::string sentence;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) sentence += ' ';
        sentence += words[i];
    }
    sentence += '.';
    return sentence;
}

}  // namespace

const std::vector<std::string>& synthetic_problem_lexicon() { return kProblemLexicon; }
const std::vector<std::string>& synthetic_praise_lexicon() { return kPraiseLexicon; }

Corpus generate_synthetic(int n, double noise, std::uint64_t seed) {
    if (n < 10 || n % 2 != 0) throw Error("generate_synthetic requires even n >= 10");
    if (noise < 0.0 || noise >= 1.0) throw Error("noise must be in [0, 1)");

    Rng rng(seed);
    Corpus corpus;
    corpus.provenance.input_records = n;
    for (int i = 0; i < n; ++i) {
        bool positive = (i % 2 == 0);  // interleave so any prefix is near-balanced
        std::size_t n_sentences = 1 + static_cast<std::size_t>(rng.below(3));
        std::string text;
        for (std::size_t s = 0; s < n_sentences; ++s) {
            if (s) text += ' ';
            text += synth_sentence(positive, rng);
        }
        char id[32];
        std::snprintf(id, sizeof(id), "synth-%06d", i);
        corpus.items.push_back({id, std::move(text), positive ? 1 : 0});
    }

    auto flips = static_cast<std::size_t>(std::llround(noise * static_cast<double>(n)));
    for (auto idx : rng.sample_indices(static_cast<std::size_t>(n), flips)) {
        corpus.items[idx].label ^= 1;
    }
    corpus.provenance.final_count = n;
    return corpus;
}

Corpus read_corpus_jsonl(std::istream& stream) {
    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    std::unordered_set<std::string> seen_ids;
    while (std::getline(stream, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) fail_line(line_no, "malformed JSON");
        LabeledComment item;
        item.id = require_string(j, "id", line_no);
        item.text = require_string(j, "text", line_no);
        auto it = j.find("label");
        if (it == j.end() || !it->is_number_integer()) {
            fail_line(line_no, "field 'label' must be 0 or 1");
        }
        std::int64_t label = it->get<std::int64_t>();
        if (label != 0 && label != 1) fail_line(line_no, "field 'label' must be 0 or 1");
        item.label = static_cast<int>(label);
        if (!seen_ids.insert(item.id).second) {
            fail_line(line_no, "duplicate id '" + item.id + "'");
        }
        corpus.items.push_back(std::move(item));
    }
    corpus.provenance.input_records = static_cast<std::int64_t>(corpus.items.size());
    corpus.provenance.final_count = corpus.provenance.input_records;
    return corpus;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& item : corpus.items) {
        json j{{"id", item.id}, {"text", item.text}, {"label", item.label}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string corpus_digest(const Corpus& corpus) {
    std::string blob;
    for (const auto& item : corpus.items) {
        blob += item.id;
        blob += '\x1f';
        blob += item.text;
        blob += '\x1f';
        blob += static_cast<char>('0' + item.label);
        blob += '\n';
    }
    return fnv1a_hex(blob);
}

}  // namespace probdet
