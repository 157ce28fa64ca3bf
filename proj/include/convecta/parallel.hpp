#pragma once

#include <atomic>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

// Thread-count control shared by the OpenMP kernels. Results never depend on
// the worker count: parallel loops write to disjoint slots and reductions run
// in fixed index order afterwards.

namespace convecta {

inline std::atomic<int>& thread_cap_storage() {
    static std::atomic<int> cap{0}; // 0 = hardware default
    return cap;
}

inline int max_threads() {
    int cap = thread_cap_storage().load();
    if (cap <= 0) {
        if (const char* env = std::getenv("CONVECTA_THREADS")) {
            int v = std::atoi(env);
            if (v > 0) return v;
        }
#ifdef _OPENMP
        return omp_get_max_threads();
#else
        return 1;
#endif
    }
    return cap;
}

inline void set_max_threads(int n) { thread_cap_storage().store(n); }

// Index-parallel loop; f(i) must only touch state owned by index i.
template <typename F>
void parallel_for(long n, F&& f) {
#ifdef _OPENMP
    int nt = max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
    for (long i = 0; i < n; ++i) f(i);
#else
    for (long i = 0; i < n; ++i) f(i);
#endif
}

// Plain loop with identical semantics, kept as the reference path for tests
// and the benchmark harness.
template <typename F>
void serial_for(long n, F&& f) {
    for (long i = 0; i < n; ++i) f(i);
}

} // namespace convecta
