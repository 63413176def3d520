#pragma once

namespace gdl {

/// Keeps large tensor buffers on the heap instead of fresh mmap regions,
/// which otherwise dominate system time in training loops. No-op outside glibc.
void tune_allocator();

}  // namespace gdl
