#pragma once

#include <cstddef>
#include <functional>

namespace clothkit {

/// Worker count: hardware concurrency, capped by the CLOTH_KIT_THREADS
/// environment variable when it is set to a positive integer.
int thread_count();

/// Runs body(i) for i in [0, n). Each index is processed exactly once; the
/// first exception thrown by any worker is rethrown on the calling thread.
/// Callers must only write to per-index output slots for results to be
/// independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace clothkit
