#pragma once

#include <cstddef>
#include <functional>

namespace powerlearn {

/// Thread cap from POWERLEARN_THREADS, falling back to the hardware count.
std::size_t default_thread_count();

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Work is handed out dynamically; the first exception thrown is rethrown
/// after all workers finish.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace powerlearn
