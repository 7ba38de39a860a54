#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gnom/corpus.hpp"

namespace gnom {

// Lowercase + split on whitespace/punctuation boundaries; punctuation runs are
// single tokens; URLs and @mentions collapse to <url> / <user>.
std::vector<std::string> tokenize(const std::string& text);

// Shared token<->id map for the encoder and the word graph, plus the graph
// node eligibility filters (min corpus frequency, stopword df ratio).
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kNumSpecials = 3;

    int id(const std::string& token) const;  // kUnk for unseen
    const std::string& token(int id) const { return tokens_.at(static_cast<size_t>(id)); }
    int size() const { return static_cast<int>(tokens_.size()); }

    int64_t corpus_freq(int id) const { return corpus_freq_.at(static_cast<size_t>(id)); }
    int64_t doc_freq(int id) const { return doc_freq_.at(static_cast<size_t>(id)); }
    bool graph_eligible(int id) const { return eligible_.at(static_cast<size_t>(id)) != 0; }
    int64_t num_docs() const { return num_docs_; }

    // ids of graph-eligible tokens, ascending
    std::vector<int> eligible_ids() const;

    void save(const std::string& path, const std::string& config_hash = "") const;
    static Vocabulary load(const std::string& path);

    friend Vocabulary build_vocab(const std::vector<const Dataset*>&, int, double);

private:
    std::vector<std::string> tokens_;
    std::vector<int64_t> corpus_freq_;
    std::vector<int64_t> doc_freq_;
    std::vector<uint8_t> eligible_;
    std::unordered_map<std::string, int> ids_;
    int64_t num_docs_ = 0;
};

// Tokens ordered by descending corpus frequency (ties lexicographic) after the
// specials. Graph eligibility: corpus_freq >= min_freq, doc_freq/num_docs <=
// stop_df_ratio, not special.
Vocabulary build_vocab(const std::vector<const Dataset*>& corpora, int min_freq = 3,
                       double stop_df_ratio = 0.4);

struct EncodedIds {
    std::vector<int> ids;       // length max_len, [CLS] first, PAD-extended
    std::vector<uint8_t> mask;  // 1 at CLS and real tokens
};

EncodedIds encode_example(const Vocabulary& v, const std::vector<std::string>& tokens, int max_len);

}  // namespace gnom
