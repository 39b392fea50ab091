#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace bbm::harness {

/// Worker count: explicit value if > 0, else BBM_WORKERS, else the hardware.
inline unsigned resolve_workers(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  if (const char* env = std::getenv("BBM_WORKERS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluates fn(i) for i in [begin, end) on `workers` threads pulling indices
/// from a shared counter. Results land at their index, so the output is the
/// same for every worker count.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t begin, std::size_t end, unsigned workers, Fn&& fn) {
  std::vector<T> out(end > begin ? end - begin : 0);
  if (out.empty()) return out;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(out.size())));
  if (workers == 1) {
    for (std::size_t i = begin; i < end; ++i) out[i - begin] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{begin};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= end) return;
      try {
        out[i - begin] = fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(end);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace bbm::harness
