#pragma once

// OpenMP helpers. Every parallelized loop in this codebase writes disjoint
// locations and performs no cross-iteration reductions, so results are
// bit-identical for any thread count (including 1).

#include <cstddef>

#if defined(_OPENMP)
#include <omp.h>
#define UWNO_OMP_FOR _Pragma("omp parallel for schedule(static)")
#else
#define UWNO_OMP_FOR
#endif

namespace uwno::detail {

constexpr std::size_t kParallelThreshold = std::size_t(1) << 16;

/// body(lo, hi) over a fixed partition of [0, n); parallel only when n is
/// large enough to pay for the fork.
template <class F>
inline void parallel_chunks(std::size_t n, F&& body) {
#if defined(_OPENMP)
    if (n > kParallelThreshold && omp_get_max_threads() > 1) {
#pragma omp parallel
        {
            const std::size_t nt = (std::size_t)omp_get_num_threads();
            const std::size_t tid = (std::size_t)omp_get_thread_num();
            const std::size_t lo = n * tid / nt;
            const std::size_t hi = n * (tid + 1) / nt;
            if (hi > lo) body(lo, hi);
        }
        return;
    }
#endif
    body(std::size_t(0), n);
}

}  // namespace uwno::detail
