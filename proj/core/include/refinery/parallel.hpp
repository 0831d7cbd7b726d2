#pragma once

#include <cstddef>
#include <functional>

namespace refinery {

/// Worker pool size: REFINERY_THREADS when set (minimum 1), otherwise the
/// hardware concurrency.
std::size_t worker_count();

/// Runs fn(0) .. fn(n-1) across the worker pool. Callers must make fn(i)
/// independent of scheduling (write only to slot i, seed per index); the
/// first exception thrown is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace refinery
