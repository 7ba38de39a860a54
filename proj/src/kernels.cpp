#include "gnom/kernels.hpp"

#include <atomic>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gnom::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

namespace ref {

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = acc ? c[static_cast<size_t>(i) * n + j] : 0.0;
            for (int p = 0; p < k; ++p) s += a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(p) * n + j];
            c[static_cast<size_t>(i) * n + j] = s;
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = acc ? c[static_cast<size_t>(i) * n + j] : 0.0;
            for (int p = 0; p < k; ++p) s += a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(j) * k + p];
            c[static_cast<size_t>(i) * n + j] = s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = acc ? c[static_cast<size_t>(i) * n + j] : 0.0;
            for (int p = 0; p < k; ++p) s += a[static_cast<size_t>(p) * m + i] * b[static_cast<size_t>(p) * n + j];
            c[static_cast<size_t>(i) * n + j] = s;
        }
    }
}

void spmm(const Csr& s, const double* x, double* y, int d, bool acc) {
    for (int i = 0; i < s.rows; ++i) {
        double* yrow = y + static_cast<size_t>(i) * d;
        if (!acc) std::memset(yrow, 0, sizeof(double) * static_cast<size_t>(d));
        for (int p = s.row_ptr[i]; p < s.row_ptr[static_cast<size_t>(i) + 1]; ++p) {
            double w = s.val[p];
            const double* xrow = x + static_cast<size_t>(s.col[p]) * d;
            for (int j = 0; j < d; ++j) yrow[j] += w * xrow[j];
        }
    }
}

}  // namespace ref

// Parallel versions split output rows across threads; within a row the
// accumulation order over the contraction index matches ref exactly, so the
// result is bit-identical regardless of thread count.

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    const bool par = g_parallel.load() && static_cast<long>(m) * k * n > 2000000;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<size_t>(i) * n;
        if (!acc) std::memset(crow, 0, sizeof(double) * static_cast<size_t>(n));
        const double* arow = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            double aip = arow[p];
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    const bool par = g_parallel.load() && static_cast<long>(m) * k * n > 2000000;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            double s = acc ? crow[j] : 0.0;
            const double* brow = b + static_cast<size_t>(j) * k;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    const bool par = g_parallel.load() && static_cast<long>(m) * k * n > 2000000;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<size_t>(i) * n;
        if (!acc) std::memset(crow, 0, sizeof(double) * static_cast<size_t>(n));
        for (int p = 0; p < k; ++p) {
            double api = a[static_cast<size_t>(p) * m + i];
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

void spmm(const Csr& s, const double* x, double* y, int d, bool acc) {
    const bool par = g_parallel.load() && static_cast<long>(s.val.size()) * d > 2000000;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < s.rows; ++i) {
        double* yrow = y + static_cast<size_t>(i) * d;
        if (!acc) std::memset(yrow, 0, sizeof(double) * static_cast<size_t>(d));
        for (int p = s.row_ptr[i]; p < s.row_ptr[static_cast<size_t>(i) + 1]; ++p) {
            double w = s.val[p];
            const double* xrow = x + static_cast<size_t>(s.col[p]) * d;
            for (int j = 0; j < d; ++j) yrow[j] += w * xrow[j];
        }
    }
}

}  // namespace gnom::kernels
