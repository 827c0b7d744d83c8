#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace airnet {

// Static-scheduled index-space loop. Bodies must write disjoint outputs;
// per-index arithmetic is unchanged, so results are bit-identical to the
// serial reference kernels regardless of thread count.
template <class F>
void parallel_for(std::int64_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) body(i);
#else
    for (std::int64_t i = 0; i < n; ++i) body(i);
#endif
}

inline int parallel_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace airnet
