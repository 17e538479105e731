#pragma once

// Deterministic fork-join helper. Work items are independent and write only
// to their own slot, so results do not depend on the number of workers.

#include <algorithm>
#include <cstddef>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tsadv {

template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  const std::size_t nt = std::min<std::size_t>(std::max(threads, 1), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  struct Failure {
    std::size_t index;
    std::string message;
  };
  std::mutex mu;
  std::optional<Failure> failure;

  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure || i < failure->index) failure = Failure{i, e.what()};
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(nt);
  const std::size_t chunk = (n + nt - 1) / nt;
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(worker, begin, end);
  }
  for (auto& th : pool) th.join();

  if (failure) throw std::runtime_error(failure->message);
}

}  // namespace tsadv
