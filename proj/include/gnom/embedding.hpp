#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace gnom {

// token -> dense vector map with stable insertion order (files round-trip
// byte-identically).
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(int dim) : dim_(dim) {}

    int dim() const { return dim_; }
    size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    void set(const std::string& token, std::vector<double> vec);
    bool has(const std::string& token) const { return index_.count(token) > 0; }
    const std::vector<double>& get(const std::string& token) const;

    // .emb text format: "<count> <dim>" header, then token + dim reals per line
    void save(const std::string& path) const;
    static EmbeddingTable load(const std::string& path);

private:
    int dim_ = 0;
    std::vector<std::string> tokens_;
    std::vector<std::vector<double>> vecs_;
    std::unordered_map<std::string, size_t> index_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace gnom
