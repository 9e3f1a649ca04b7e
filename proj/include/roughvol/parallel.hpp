#pragma once

#include <cstddef>
#include <functional>

namespace roughvol {

/// 0 means "auto": ROUGHVOL_THREADS if set, else hardware concurrency.
int resolve_threads(int requested);

/// Runs task(i) for i in [0, n_tasks) on up to `threads` workers. Tasks are
/// claimed dynamically, so each task must write only to its own outputs.
/// The first exception thrown by a task is rethrown on the calling thread.
void parallel_for(std::size_t n_tasks, int threads, const std::function<void(std::size_t)>& task);

}  // namespace roughvol
