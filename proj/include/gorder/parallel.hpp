#pragma once

#include <cstddef>
#include <functional>

namespace gorder {

/// Worker count: hardware concurrency, capped by the GORDER_THREADS
/// environment variable when it holds a positive integer.
std::size_t thread_count();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and the thread count; the first exception (by chunk
/// order) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace gorder
