#pragma once

#include <cstddef>
#include <functional>

namespace nwband {

/// Upper bound on worker threads used by library routines. Zero means
/// std::thread::hardware_concurrency().
void set_max_threads(unsigned count);
unsigned max_threads();

/// Runs body(i) for i in [0, count). Iterations are distributed over at most
/// max_threads() workers; the first exception thrown by any iteration is
/// rethrown after all workers finish. Callers that reduce results must write
/// into per-index slots and combine them afterwards so the outcome does not
/// depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace nwband
