#pragma once

#include <cstddef>
#include <functional>

namespace planrisk {

// Resolves a job count: requested > 0 wins, else PLANRISK_JOBS, else hardware
// concurrency (at least 1).
int resolve_jobs(int requested);

// Runs body(i) for i in [0, n). With jobs > 1, indices are processed by a small
// worker pool; the first exception (lowest index) is rethrown after all workers
// join. Callers must keep per-index work independent so results are identical
// to the serial order.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace planrisk
