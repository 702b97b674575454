#pragma once

#include <cstddef>
#include <cstdlib>
#include <span>
#include <thread>
#include <vector>

namespace berglab {

/// Thread cap from BERGMAN_LAB_THREADS (0 or unset = hardware concurrency).
inline unsigned max_threads() {
  if (const char* env = std::getenv("BERGMAN_LAB_THREADS")) {
    long v = std::atol(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Static block partition of [0, n). Each worker writes only to indices it
/// owns, so results never depend on the thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned nt = max_threads();
  if (nt <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (nt > n) nt = static_cast<unsigned>(n);
  std::vector<std::thread> workers;
  workers.reserve(nt);
  std::size_t chunk = (n + nt - 1) / nt;
  for (unsigned t = 0; t < nt; ++t) {
    std::size_t lo = t * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

/// Pairwise tree reduction; fixed association independent of thread count.
template <class T>
T pairwise_sum(std::span<const T> xs) {
  if (xs.empty()) return T{};
  if (xs.size() <= 8) {
    T acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc += xs[i];
    return acc;
  }
  std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace berglab
