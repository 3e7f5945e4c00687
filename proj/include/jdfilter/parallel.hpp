#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace jdf {

// Runs fn(i) for i in [0, n) on `workers` threads over contiguous ranges.
// Callers write to disjoint preallocated slots and reduce serially
// afterwards, so results do not depend on the worker count.
inline void parallel_for(long n, int workers,
                         const std::function<void(long)>& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n < 2 * workers) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const long chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const long lo = w * chunk;
    const long hi = std::min(n, lo + chunk);
    threads.emplace_back([lo, hi, w, &fn, &errors]() {
      try {
        for (long i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace jdf
