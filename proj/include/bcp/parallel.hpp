#pragma once

#include <functional>

namespace bcp {

// Worker count used by parallel_for: hardware concurrency, capped by the
// BCP_THREADS environment variable (read once).
int worker_count();

// Runs fn(begin, end) over disjoint index ranges covering [0, count).
// Chunks are contiguous, so row-sliced loops write disjoint memory and the
// result is identical to the sequential scan for any worker count.
void parallel_for(long count, const std::function<void(long, long)>& fn);

} // namespace bcp
