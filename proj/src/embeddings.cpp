#include "probdet/embeddings.hpp"

#include "probdet/error.hpp"
#include "probdet/io_util.hpp"
#include "probdet/text_features.hpp"

#include <json.hpp>

#include <algorithm>
#include <istream>
#include <sstream>

namespace probdet {

using nlohmann::json;

EmbeddingTable load_glove(std::istream& stream) {
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t space = line.find(' ');
        if (space == std::string::npos || space == 0) {
            throw Error("line " + std::to_string(line_no) + ": expected token and values");
        }
        std::string token = line.substr(0, space);
        std::vector<double> values;
        std::size_t pos = space + 1;
        while (pos < line.size()) {
            std::size_t next = line.find(' ', pos);
            std::size_t len = (next == std::string::npos ? line.size() : next) - pos;
            if (len > 0) {
                try {
                    values.push_back(string_to_double(std::string_view(line).substr(pos, len)));
                } catch (const Error&) {
                    throw Error("line " + std::to_string(line_no) + ": non-numeric field");
                }
            }
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (values.empty()) {
            throw Error("line " + std::to_string(line_no) + ": no vector values");
        }
        if (table.dim == 0) {
            table.dim = static_cast<int>(values.size());
        } else if (static_cast<int>(values.size()) != table.dim) {
            throw Error("line " + std::to_string(line_no) + ": dimension mismatch (expected " +
                        std::to_string(table.dim) + ", got " + std::to_string(values.size()) +
                        ")");
        }
        table.vectors[token] = std::move(values);  // later duplicates overwrite
    }
    return table;
}

std::string glove_to_text(const EmbeddingTable& table) {
    // Tokens sorted for reproducible output.
    std::vector<const std::string*> tokens;
    tokens.reserve(table.vectors.size());
    for (const auto& [token, vec] : table.vectors) tokens.push_back(&token);
    std::sort(tokens.begin(), tokens.end(),
              [](const std::string* a, const std::string* b) { return *a < *b; });
    std::string out;
    for (const auto* token : tokens) {
        out += *token;
        for (double v : table.vectors.at(*token)) {
            out += ' ';
            out += double_to_string(v);
        }
        out += '\n';
    }
    return out;
}

PrecomputedVectors load_precomputed(std::istream& stream) {
    PrecomputedVectors store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error("line " + std::to_string(line_no) + ": malformed JSON");
        }
        if (!j.contains("id") || !j["id"].is_string()) {
            throw Error("line " + std::to_string(line_no) + ": missing string field 'id'");
        }
        if (!j.contains("vector") || !j["vector"].is_array()) {
            throw Error("line " + std::to_string(line_no) + ": missing array field 'vector'");
        }
        std::string id = j["id"].get<std::string>();
        auto vec = j["vector"].get<std::vector<double>>();
        if (static_cast<int>(vec.size()) != PrecomputedVectors::kDim) {
            throw Error("line " + std::to_string(line_no) + ": vector for id '" + id +
                        "' has length " + std::to_string(vec.size()) + ", expected 768");
        }
        if (!store.by_id.emplace(id, std::move(vec)).second) {
            throw Error("line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
        }
    }
    return store;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> sentences;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        std::string_view fragment = text.substr(start, end - start);
        std::size_t b = fragment.find_first_not_of(" \t\r\n");
        if (b != std::string_view::npos) {
            std::size_t e = fragment.find_last_not_of(" \t\r\n");
            sentences.emplace_back(fragment.substr(b, e - b + 1));
        }
        start = end;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            bool at_end = i + 1 == text.size();
            bool before_space = !at_end && (text[i + 1] == ' ' || text[i + 1] == '\t' ||
                                            text[i + 1] == '\n' || text[i + 1] == '\r');
            if (at_end || before_space) flush(i + 1);
        }
    }
    flush(text.size());
    return sentences;
}

int EncodedSequence::true_count() const {
    int n = 0;
    for (char m : mask) n += m ? 1 : 0;
    return n;
}

EncodedSequence encode_sequence(std::string_view text, const EmbeddingTable& table,
                                int max_len) {
    if (table.empty() || table.dim <= 0) throw Error("encode_sequence needs a non-empty table");
    auto tokens = tokenize(text);
    EncodedSequence seq;
    seq.rows = Mat::Zero(max_len, table.dim);
    seq.mask.assign(static_cast<std::size_t>(max_len), 0);
    const int n = std::min<int>(static_cast<int>(tokens.size()), max_len);
    for (int i = 0; i < n; ++i) {
        seq.mask[static_cast<std::size_t>(i)] = 1;
        auto it = table.vectors.find(tokens[static_cast<std::size_t>(i)]);
        if (it == table.vectors.end()) continue;  // OOV stays a zero row, mask true
        for (int j = 0; j < table.dim; ++j) seq.rows(i, j) = it->second[static_cast<std::size_t>(j)];
    }
    return seq;
}

SentenceBatch encode_sentences(std::string_view text, const EmbeddingTable& table, int max_len,
                               int max_sentences) {
    SentenceBatch batch;
    auto sentences = split_sentences(text);
    const int n = std::min<int>(static_cast<int>(sentences.size()), max_sentences);
    for (int s = 0; s < n; ++s) {
        batch.push_back(encode_sequence(sentences[static_cast<std::size_t>(s)], table, max_len));
    }
    return batch;
}

}  // namespace probdet
