#pragma once

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qme {

// Execution policy for the data-parallel kernels (seed refinement, lattice
// scans, sweep grids). Serial is the reference path; Parallel distributes
// iterations over OpenMP threads. Every kernel writes into preallocated
// slots, so the two paths produce bit-identical results.
enum class Exec { Serial, Parallel };

// Worker-thread cap: QME_THREADS when set to a positive integer, otherwise
// the OpenMP default (1 in a build without OpenMP).
inline int max_threads() {
  static const int cached = [] {
    if (const char* env = std::getenv("QME_THREADS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end != env && v > 0) return static_cast<int>(v);
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
  }();
  return cached;
}

template <typename Fn>
void parallel_for(long n, Exec exec, Fn&& fn) {
#ifdef _OPENMP
  if (exec == Exec::Parallel && n > 1) {
    const int threads = max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
#else
  (void)exec;
#endif
  for (long i = 0; i < n; ++i) fn(i);
}

}  // namespace qme
