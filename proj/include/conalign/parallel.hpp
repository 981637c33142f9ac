#pragma once

#include <cstddef>
#include <functional>

namespace conalign {

/// Caps the worker count of parallel_for; 0 means hardware concurrency.
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, count) on up to max_threads() workers. Every index
/// is handled independently, so results do not depend on the thread count.
/// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace conalign
