#pragma once

#include <cstddef>
#include <functional>

namespace qdd {

/// Worker count: QD_DISCRETE_THREADS when set to a positive integer,
/// otherwise the hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Each index is
/// processed exactly once; callers write results into per-index slots so the
/// outcome does not depend on the worker count. The first exception thrown
/// by any body is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t workers = 0);

} // namespace qdd
