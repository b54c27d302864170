#include "rmf/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef RMF_HAVE_OPENMP
#include <omp.h>
#endif

namespace rmf {

int worker_threads() {
  if (const char* env = std::getenv("RMF_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
#ifdef RMF_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void parallel_for(int n, const std::function<void(int)>& body) {
#ifdef RMF_HAVE_OPENMP
  const int threads = worker_threads();
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  for (int i = 0; i < n; ++i) body(i);
}

}  // namespace rmf
