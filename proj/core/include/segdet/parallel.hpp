#pragma once

#include <cstddef>
#include <functional>

namespace segdet {

/// 0 means "use the machine's hardware concurrency".
int resolve_threads(int requested);

/**
 * Runs fn(i) for i in [0, n) over `threads` workers using static contiguous
 * chunks. Callers write results into pre-sized slots indexed by i, so output
 * never depends on the thread count. The first exception thrown is rethrown.
 */
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace segdet
