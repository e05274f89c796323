// SPDX-License-Identifier: Apache-2.0
#ifndef PLAIM_PARALLEL_HPP
#define PLAIM_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace plaim {

/// Worker count: hardware concurrency, capped by PLAIM_THREADS when set.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PLAIM_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    } catch (const std::exception&) {
    }
  }
  return n;
}

/// Splits [0, n) into contiguous chunks, one per worker, and calls body(chunk, begin, end).
/// Chunk boundaries depend only on n and the worker count; callers reduce per-chunk results
/// in chunk order so results do not depend on scheduling.
template <class Body>
void parallel_chunks(std::size_t n, unsigned workers, Body&& body) {
  workers = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(workers, n)));
  if (workers == 1) {
    body(0u, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t per = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * per);
    const std::size_t end = std::min(n, begin + per);
    threads.emplace_back([&, w, begin, end] {
      try {
        body(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Runs body(i) for every i in [0, n) across workers.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  parallel_chunks(n, worker_count(), [&](unsigned, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) body(i);
  });
}

}  // namespace plaim

#endif  // PLAIM_PARALLEL_HPP
