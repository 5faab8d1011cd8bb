#include "riskgrid/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace riskgrid {

std::size_t worker_threads() {
  std::size_t n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("RISKGRID_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
  }
  return n;
}

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t threads = std::min(worker_threads(), n);
  if (threads <= 1) {
    fn(0, n);
    return;
  }

  const std::size_t block = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run_block = [&](std::size_t begin, std::size_t end) {
    try {
      fn(begin, end);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t begin = t * block;
    const std::size_t end = std::min(n, begin + block);
    if (begin >= end) break;
    pool.emplace_back(run_block, begin, end);
  }
  run_block(0, std::min(block, n));
  for (auto& th : pool) th.join();

  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace riskgrid
