#pragma once

#include <cstddef>
#include <functional>

namespace riskgrid {

// Worker-thread cap: min(hardware_concurrency, RISKGRID_THREADS). The env var
// is re-read on every call so tests can flip it at runtime.
std::size_t worker_threads();

// Runs fn(begin, end) over contiguous blocks of [0, n). Callers must write
// results into per-index slots and reduce sequentially afterwards; that keeps
// every computation bitwise-identical regardless of the thread count.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace riskgrid
