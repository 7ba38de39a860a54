#pragma once

#include "gnom/sparse.hpp"

// Dense and sparse inner loops. Each kernel has a serial twin under
// kernels::ref with the same per-element accumulation order; the OpenMP
// versions parallelize over independent output rows only, so outputs are
// bit-identical to the reference for any thread count.
namespace gnom::kernels {

// global switch; grid workers turn this off to avoid oversubscription
void set_parallel(bool enabled);
bool parallel_enabled();

// C[m,n] = A[m,k] * B[k,n]         (+= when acc)
void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
// C[m,n] = A[m,k] * B[n,k]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
// C[m,n] = A[k,m]^T * B[k,n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
// Y[m,d] = S[m,n] * X[n,d]
void spmm(const Csr& s, const double* x, double* y, int d, bool acc = false);

namespace ref {
void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void spmm(const Csr& s, const double* x, double* y, int d, bool acc = false);
}  // namespace ref

}  // namespace gnom::kernels
