#pragma once

#include <cstddef>
#include <functional>

namespace gdl {

/// Worker count: hardware concurrency capped by the GDL_THREADS environment
/// variable when set.
std::size_t thread_count();

/// Runs body(begin, end) over contiguous, statically assigned chunks of
/// [0, n). Each index is visited by exactly one worker, so kernels that write
/// disjoint outputs stay bitwise deterministic regardless of thread count.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace gdl
