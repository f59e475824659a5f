#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <future>
#include <vector>

namespace hmfront {

/// Calls body(i) for i in [0, count) on up to `workers` threads. Each index is
/// handled by exactly one call, so bodies that write only to slot i produce
/// the same result for any worker count. The first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  std::vector<std::future<void>> jobs;
  jobs.reserve(w);
  for (std::size_t t = 0; t < w; ++t)
    jobs.push_back(std::async(std::launch::async, [&, t] {
      for (std::size_t i = t; i < count; i += w) body(i);
    }));
  std::exception_ptr first;
  for (auto& j : jobs) {
    try {
      j.get();
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace hmfront
