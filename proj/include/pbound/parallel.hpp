#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace pbound {

// Runs body(i) for i in [0, n) on up to `threads` workers with static
// chunking. Each index must write only its own output slot. If several
// indices throw, the exception of the lowest failing index is rethrown.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::size_t> error_index(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      for (std::size_t i = begin; i < end; ++i) {
        try {
          body(i);
        } catch (...) {
          errors[w] = std::current_exception();
          error_index[w] = i;
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  std::size_t first = workers;
  for (std::size_t w = 0; w < workers; ++w) {
    if (errors[w] && (first == workers || error_index[w] < error_index[first])) first = w;
  }
  if (first != workers) std::rethrow_exception(errors[first]);
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace pbound
