#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

#include "hebbcnn/ops.hpp"

namespace hebb::detail {

// Runs fn(begin, end) over contiguous chunks of [0, count). Each index is
// processed by exactly one worker, so per-index results are independent of
// the worker count.
template <class Fn>
void parallel_chunks(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min(num_threads(), count);
  if (workers <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t t = 0; t < workers; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, b, e, t] {
      try {
        fn(b, e);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace hebb::detail
