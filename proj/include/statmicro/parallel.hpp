#pragma once

#include <cstddef>
#include <functional>

namespace statmicro {

/// Number of worker threads: hardware concurrency, capped by the
/// STATMICRO_THREADS environment variable when it holds a positive integer.
std::size_t worker_count();

/// Calls body(i) for every i in [0, n), split into contiguous blocks across
/// worker_count() threads. Each index is visited exactly once, so results
/// written to per-index slots do not depend on the thread count. The first
/// exception thrown by any block is rethrown after all threads join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace statmicro
