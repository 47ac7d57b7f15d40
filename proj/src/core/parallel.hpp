#pragma once

#include <cstddef>
#include <vector>

#ifdef CONEKIT_HAVE_OPENMP
#include <omp.h>
#endif

namespace conekit::par {

// Fixed chunk size for blocked reductions. Partial sums are computed per
// chunk (possibly in parallel) and combined in chunk order, so the result
// does not depend on the number of threads.
inline constexpr std::size_t kChunk = 2048;

inline int max_threads() {
#ifdef CONEKIT_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef CONEKIT_HAVE_OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Serial reference: plain left-to-right accumulation.
template <class F>
double sum_serial(std::size_t n, F&& term) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += term(i);
  return acc;
}

// Blocked sum, parallel over chunks.
template <class F>
double sum_blocked(std::size_t n, F&& term) {
  if (n == 0) return 0.0;
  const std::size_t nchunks = (n + kChunk - 1) / kChunk;
  if (nchunks == 1) return sum_serial(n, term);
  std::vector<double> partial(nchunks, 0.0);
#ifdef CONEKIT_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (long long c = 0; c < static_cast<long long>(nchunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
    const std::size_t hi = lo + kChunk < n ? lo + kChunk : n;
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += term(i);
    partial[static_cast<std::size_t>(c)] = acc;
  }
  double acc = 0.0;
  for (double p : partial) acc += p;
  return acc;
}

// Parallel loop without reduction; each index is owned by exactly one
// iteration, so results are deterministic.
template <class F>
void for_each_index(std::size_t n, F&& body) {
#ifdef CONEKIT_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    body(static_cast<std::size_t>(i));
}

}  // namespace conekit::par
