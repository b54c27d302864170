#pragma once

#include <functional>

namespace rmf {

/// Worker count: RMF_THREADS if set and positive, otherwise the OpenMP default.
int worker_threads();

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs; callers
/// reduce partial results in index order so the thread count never changes a result.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace rmf
