#include "gnom/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gnom/common.hpp"

namespace gnom {

namespace {

const char* kPadTok = "<pad>";
const char* kUnkTok = "<unk>";
const char* kClsTok = "<cls>";
const char* kUrlTok = "<url>";
const char* kUserTok = "<user>";

bool is_ascii_space(uint32_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_punct_cp(uint32_t c) {
    if (c < 128) return std::ispunct(static_cast<int>(c)) != 0;
    // general punctuation block and a few common typographic marks
    return (c >= 0x2000 && c <= 0x206F) || c == 0x00A1 || c == 0x00BF;
}

// lowercase ASCII and the Latin-1 supplement; other code points pass through
uint32_t lower_cp(uint32_t c) {
    if (c >= 'A' && c <= 'Z') return c + 32;
    if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) return c + 32;
    return c;
}

void append_cp(std::string& out, uint32_t c) {
    if (c < 0x80) {
        out += static_cast<char>(c);
    } else if (c < 0x800) {
        out += static_cast<char>(0xC0 | (c >> 6));
        out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
        out += static_cast<char>(0xE0 | (c >> 12));
        out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (c >> 18));
        out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (c & 0x3F));
    }
}

// decode next UTF-8 code point; malformed bytes are taken as single code points
uint32_t next_cp(const std::string& s, size_t& i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
        ++i;
        return c;
    }
    int extra = c >= 0xF0 ? 3 : c >= 0xE0 ? 2 : c >= 0xC0 ? 1 : 0;
    // lone continuation byte or truncated sequence: treat as a single code point
    if (extra == 0 || i + static_cast<size_t>(extra) >= s.size()) {
        ++i;
        return c;
    }
    uint32_t cp = c & (0x3F >> extra);
    for (int k = 0; k < extra; ++k) {
        unsigned char cc = static_cast<unsigned char>(s[i + 1 + static_cast<size_t>(k)]);
        if ((cc & 0xC0) != 0x80) {
            ++i;
            return c;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    i += static_cast<size_t>(extra) + 1;
    return cp;
}

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

void emit_runs(const std::string& chunk, std::vector<std::string>& out) {
    std::string word, punct;
    auto flush_word = [&] {
        if (!word.empty()) out.push_back(std::exchange(word, {}));
    };
    auto flush_punct = [&] {
        if (!punct.empty()) out.push_back(std::exchange(punct, {}));
    };
    size_t i = 0;
    while (i < chunk.size()) {
        uint32_t cp = lower_cp(next_cp(chunk, i));
        if (is_punct_cp(cp)) {
            flush_word();
            append_cp(punct, cp);
        } else {
            flush_punct();
            append_cp(word, cp);
        }
    }
    flush_word();
    flush_punct();
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    size_t i = 0;
    std::string chunk;
    auto handle_chunk = [&] {
        if (chunk.empty()) return;
        std::string lower;
        size_t j = 0;
        while (j < chunk.size()) append_cp(lower, lower_cp(next_cp(chunk, j)));
        if (starts_with(lower, "http://") || starts_with(lower, "https://") || starts_with(lower, "www.")) {
            out.push_back(kUrlTok);
        } else if (chunk.size() > 1 && chunk[0] == '@') {
            out.push_back(kUserTok);
        } else {
            emit_runs(chunk, out);
        }
        chunk.clear();
    };
    while (i < text.size()) {
        size_t start = i;
        uint32_t cp = next_cp(text, i);
        if (is_ascii_space(cp)) {
            handle_chunk();
        } else {
            chunk.append(text, start, i - start);
        }
    }
    handle_chunk();
    return out;
}

int Vocabulary::id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::eligible_ids() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (eligible_[static_cast<size_t>(i)]) out.push_back(i);
    return out;
}

Vocabulary build_vocab(const std::vector<const Dataset*>& corpora, int min_freq, double stop_df_ratio) {
    bool any = false;
    for (const auto* d : corpora)
        if (d && !d->examples.empty()) any = true;
    if (!any) throw Error::data("build_vocab: empty corpora");

    std::map<std::string, std::pair<int64_t, int64_t>> counts;  // token -> (corpus_freq, doc_freq)
    int64_t num_docs = 0;
    for (const auto* d : corpora) {
        if (!d) continue;
        for (const auto& ex : d->examples) {
            ++num_docs;
            auto toks = tokenize(ex.text);
            std::set<std::string> uniq(toks.begin(), toks.end());
            for (const auto& t : toks) counts[t].first++;
            for (const auto& t : uniq) counts[t].second++;
        }
    }

    // order: specials, then by descending corpus_freq, ties lexicographic
    std::vector<std::pair<std::string, std::pair<int64_t, int64_t>>> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.first < b.first;
    });

    Vocabulary v;
    v.num_docs_ = num_docs;
    auto push = [&](const std::string& tok, int64_t cf, int64_t df, bool elig) {
        v.ids_[tok] = static_cast<int>(v.tokens_.size());
        v.tokens_.push_back(tok);
        v.corpus_freq_.push_back(cf);
        v.doc_freq_.push_back(df);
        v.eligible_.push_back(elig ? 1 : 0);
    };
    push(kPadTok, 0, 0, false);
    push(kUnkTok, 0, 0, false);
    push(kClsTok, 0, 0, false);
    for (const auto& [tok, c] : sorted) {
        if (v.ids_.count(tok)) continue;  // text literally containing a special token string
        bool elig = c.first >= min_freq &&
                    static_cast<double>(c.second) <= stop_df_ratio * static_cast<double>(num_docs);
        push(tok, c.first, c.second, elig);
    }
    return v;
}

EncodedIds encode_example(const Vocabulary& v, const std::vector<std::string>& tokens, int max_len) {
    if (max_len < 2) throw Error::config("encode_example: max_len must be >= 2");
    EncodedIds enc;
    enc.ids.assign(static_cast<size_t>(max_len), Vocabulary::kPad);
    enc.mask.assign(static_cast<size_t>(max_len), 0);
    enc.ids[0] = Vocabulary::kCls;
    enc.mask[0] = 1;
    size_t n = std::min(tokens.size(), static_cast<size_t>(max_len - 1));
    for (size_t i = 0; i < n; ++i) {
        enc.ids[i + 1] = v.id(tokens[i]);
        enc.mask[i + 1] = 1;
    }
    return enc;
}

void Vocabulary::save(const std::string& path, const std::string& config_hash) const {
    std::ofstream os(path);
    if (!os) throw Error::data("cannot write vocabulary file " + path);
    os << "GNOM-VOCAB v1";
    if (!config_hash.empty()) os << " config=" << config_hash;
    os << "\n";
    os << "#num_docs\t" << num_docs_ << "\n";
    for (int i = 0; i < size(); ++i) {
        os << tokens_[static_cast<size_t>(i)] << '\t' << i << '\t' << corpus_freq_[static_cast<size_t>(i)]
           << '\t' << doc_freq_[static_cast<size_t>(i)] << '\t' << (eligible_[static_cast<size_t>(i)] ? 1 : 0)
           << "\n";
    }
    if (!os) throw Error::data("short write on " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error::data("cannot open vocabulary file " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("GNOM-VOCAB v1", 0) != 0)
        throw Error::data("bad vocabulary header in " + path);
    Vocabulary v;
    size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.rfind("#num_docs\t", 0) == 0) {
            v.num_docs_ = std::stoll(line.substr(10));
            continue;
        }
        auto fields = split(line, '\t');
        if (fields.size() != 5)
            throw Error::data(path + ":" + std::to_string(line_no) + ": expected 5 tab-separated fields");
        int id = std::stoi(fields[1]);
        if (id != static_cast<int>(v.tokens_.size()))
            throw Error::data(path + ":" + std::to_string(line_no) + ": ids must be contiguous from 0");
        v.ids_[fields[0]] = id;
        v.tokens_.push_back(fields[0]);
        v.corpus_freq_.push_back(std::stoll(fields[2]));
        v.doc_freq_.push_back(std::stoll(fields[3]));
        v.eligible_.push_back(fields[4] == "1" ? 1 : 0);
    }
    if (v.size() < Vocabulary::kNumSpecials) throw Error::data("vocabulary file " + path + " missing specials");
    return v;
}

}  // namespace gnom
