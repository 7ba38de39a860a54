#include "gnom/embedding.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "gnom/common.hpp"

namespace gnom {

void EmbeddingTable::set(const std::string& token, std::vector<double> vec) {
    if (static_cast<int>(vec.size()) != dim_)
        throw Error::data("embedding for '" + token + "' has dim " + std::to_string(vec.size()) +
                          ", table dim is " + std::to_string(dim_));
    for (double v : vec)
        if (!std::isfinite(v)) throw Error::data("non-finite embedding entry for '" + token + "'");
    auto it = index_.find(token);
    if (it != index_.end()) {
        vecs_[it->second] = std::move(vec);
        return;
    }
    index_[token] = tokens_.size();
    tokens_.push_back(token);
    vecs_.push_back(std::move(vec));
}

const std::vector<double>& EmbeddingTable::get(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw Error::data("no embedding for token '" + token + "'");
    return vecs_[it->second];
}

void EmbeddingTable::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw Error::data("cannot write embedding file " + path);
    os << tokens_.size() << " " << dim_ << "\n";
    for (size_t i = 0; i < tokens_.size(); ++i) {
        os << tokens_[i];
        for (double v : vecs_[i]) os << " " << format_double(v);
        os << "\n";
    }
    if (!os) throw Error::data("short write on " + path);
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error::data("cannot open embedding file " + path);
    size_t count;
    int dim;
    if (!(is >> count >> dim) || dim <= 0) throw Error::data("bad embedding header in " + path);
    EmbeddingTable table(dim);
    for (size_t i = 0; i < count; ++i) {
        std::string token;
        if (!(is >> token)) throw Error::data("truncated embedding file " + path);
        std::vector<double> vec(dim);
        for (int j = 0; j < dim; ++j)
            if (!(is >> vec[j])) throw Error::data("truncated embedding file " + path);
        table.set(token, std::move(vec));
    }
    return table;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;  // zero-norm vectors compare as 0
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace gnom
