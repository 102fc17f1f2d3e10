#pragma once

#include <cstddef>
#include <functional>

namespace wassreg {

//! Number of worker threads: WASSREG_THREADS if set, hardware concurrency
//! otherwise, always at least 1.
int thread_budget();

//! Runs fn(i) for i in [0, count) on up to thread_budget() threads with a
//! static block partition. Callers are responsible for making iterations
//! independent; results should be written to preallocated slots so the
//! outcome does not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

} // namespace wassreg
