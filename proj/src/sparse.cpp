#include "gnom/sparse.hpp"

#include <algorithm>
#include <cmath>

#include "gnom/common.hpp"

namespace gnom {

void SparseMatrix::accumulate(int r, int c, double w) {
    entries_.push_back({r, c, w});
    dirty_ = true;
}

void SparseMatrix::push_sorted(int r, int c, double w) {
    if (!entries_.empty()) {
        const Entry& last = entries_.back();
        if (r < last.row || (r == last.row && c <= last.col))
            throw Error::engine("SparseMatrix::push_sorted: out-of-order entry");
    }
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_)
        throw Error::engine("SparseMatrix: index out of bounds");
    if (!std::isfinite(w)) throw Error::engine("SparseMatrix: non-finite weight");
    if (w != 0.0) entries_.push_back({r, c, w});
}

void SparseMatrix::finalize() {
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Entry> merged;
    merged.reserve(entries_.size());
    for (const Entry& e : entries_) {
        if (e.row < 0 || e.row >= rows_ || e.col < 0 || e.col >= cols_)
            throw Error::engine("SparseMatrix: index out of bounds");
        if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col) {
            merged.back().weight += e.weight;
        } else {
            merged.push_back(e);
        }
    }
    entries_.clear();
    for (const Entry& e : merged) {
        if (!std::isfinite(e.weight)) throw Error::engine("SparseMatrix: non-finite weight");
        if (e.weight != 0.0) entries_.push_back(e);
    }
    dirty_ = false;
}

double SparseMatrix::at(int r, int c) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), Entry{r, c, 0.0},
                               [](const Entry& a, const Entry& b) {
                                   return a.row != b.row ? a.row < b.row : a.col < b.col;
                               });
    if (it != entries_.end() && it->row == r && it->col == c) return it->weight;
    return 0.0;
}

SparseMatrix SparseMatrix::row_normalized() const {
    std::vector<double> row_sum(rows_, 0.0);
    for (const Entry& e : entries_) row_sum[e.row] += e.weight;
    SparseMatrix out(rows_, cols_);
    for (const Entry& e : entries_) {
        double s = row_sum[e.row];
        out.push_sorted(e.row, e.col, s != 0.0 ? e.weight / s : e.weight);
    }
    return out;
}

SparseMatrix SparseMatrix::transposed() const {
    SparseMatrix out(cols_, rows_);
    for (const Entry& e : entries_) out.accumulate(e.col, e.row, e.weight);
    out.finalize();
    return out;
}

Csr Csr::from(const SparseMatrix& m) {
    Csr c;
    c.rows = m.rows();
    c.cols = m.cols();
    c.row_ptr.assign(static_cast<size_t>(m.rows()) + 1, 0);
    c.col.reserve(m.nnz());
    c.val.reserve(m.nnz());
    for (const auto& e : m.entries()) c.row_ptr[static_cast<size_t>(e.row) + 1]++;
    for (int r = 0; r < m.rows(); ++r) c.row_ptr[static_cast<size_t>(r) + 1] += c.row_ptr[r];
    for (const auto& e : m.entries()) {
        c.col.push_back(e.col);
        c.val.push_back(e.weight);
    }
    return c;
}

}  // namespace gnom
