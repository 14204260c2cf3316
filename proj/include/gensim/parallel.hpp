#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gensim {

/// Runs fn(i) for i in [0, n) over `lanes` threads pulling from a shared
/// counter. The first exception thrown by any call is rethrown after join.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t lanes, Fn&& fn) {
  if (n == 0) return;
  lanes = std::clamp<std::size_t>(lanes, 1, n);
  if (lanes == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(lanes);
    for (std::size_t t = 0; t < lanes; ++t) threads.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gensim
