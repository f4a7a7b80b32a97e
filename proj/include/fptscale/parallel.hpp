#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fpt {

// Runs body(chunk) for chunk in [0, chunks) on up to `threads` workers. Work is
// partitioned by chunk index only, so callers that merge per-chunk results in
// index order get output independent of the worker count.
template <class Body>
void for_each_chunk(std::size_t chunks, unsigned threads, Body&& body) {
  if (threads <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c; (c = next.fetch_add(1)) < chunks;) {
      try {
        body(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  unsigned n = std::min<std::size_t>(threads, chunks);
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fpt
