#pragma once

#include <cstdint>
#include <vector>

namespace gnom {

// COO sparse matrix with entries kept sorted by (row, col). Duplicate
// coordinates are rejected at insert time; weights must be finite.
class SparseMatrix {
public:
    struct Entry {
        int row;
        int col;
        double weight;
    };

    SparseMatrix() = default;
    SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const std::vector<Entry>& entries() const { return entries_; }
    size_t nnz() const { return entries_.size(); }

    // add value at (r,c); values accumulating on the same coordinate are summed
    void accumulate(int r, int c, double w);

    // finalize after a batch of accumulate() calls: sorts, merges duplicates,
    // drops exact zeros, validates bounds and finiteness
    void finalize();

    // set entry assuming finalize() already established sorted order (fast path
    // for construction in row-major order)
    void push_sorted(int r, int c, double w);

    double at(int r, int c) const;  // 0 when absent

    SparseMatrix row_normalized() const;
    SparseMatrix transposed() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<Entry> entries_;
    bool dirty_ = false;
};

// Compressed-row view used by the spmm kernels. Row pointers into col/val.
struct Csr {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_ptr;
    std::vector<int> col;
    std::vector<double> val;

    static Csr from(const SparseMatrix& m);
};

}  // namespace gnom
