#pragma once

// Row-major dgemm wrapper. The OpenBLAS pool is pinned to
// UWNO_BLAS_THREADS (default 1); large products are instead split across
// OpenMP threads by disjoint output blocks, which keeps every output element
// on a single thread with an unchanged summation order: results are
// bit-identical for any thread count.

#include <algorithm>
#include <cstdlib>

#include <cblas.h>

#include "uwno/parallel.hpp"

extern "C" void openblas_set_num_threads(int);

namespace uwno::detail {

inline void ensure_blas_threads() {
    static const bool once = [] {
        int n = 1;
        if (const char* e = std::getenv("UWNO_BLAS_THREADS")) n = std::max(1, std::atoi(e));
        openblas_set_num_threads(n);
        return true;
    }();
    (void)once;
}

inline void gemm_raw(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                     const double* a, int lda, const double* b, int ldb, double beta,
                     double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c,
                ldc);
}

/// C = alpha * op(A) op(B) + beta * C, row-major.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb, double beta, double* c,
                 int ldc) {
    ensure_blas_threads();
#if defined(_OPENMP)
    const double work = double(m) * double(n) * double(k);
    if (work > double(1 << 21) && omp_get_max_threads() > 1 && !omp_in_parallel()) {
        if (n >= 128) {
#pragma omp parallel
            {
                const int nt = omp_get_num_threads();
                const int tid = omp_get_thread_num();
                const int lo = (int)((long)n * tid / nt);
                const int hi = (int)((long)n * (tid + 1) / nt);
                if (hi > lo) {
                    const double* bp = trans_b ? b + (long)lo * ldb : b + lo;
                    gemm_raw(trans_a, trans_b, m, hi - lo, k, alpha, a, lda, bp, ldb, beta,
                             c + lo, ldc);
                }
            }
            return;
        }
        if (m >= 128) {
#pragma omp parallel
            {
                const int nt = omp_get_num_threads();
                const int tid = omp_get_thread_num();
                const int lo = (int)((long)m * tid / nt);
                const int hi = (int)((long)m * (tid + 1) / nt);
                if (hi > lo) {
                    const double* ap = trans_a ? a + lo : a + (long)lo * lda;
                    gemm_raw(trans_a, trans_b, hi - lo, n, k, alpha, ap, lda, b, ldb, beta,
                             c + (long)lo * ldc, ldc);
                }
            }
            return;
        }
    }
#endif
    gemm_raw(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace uwno::detail
