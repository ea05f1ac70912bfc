#pragma once

#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bvm/rng.hpp"

namespace bvm {

// Worker count resolution: 0 means "all hardware threads", otherwise a cap.
inline int resolve_threads(int requested) {
#ifdef _OPENMP
    const int hw = omp_get_max_threads();
    if (requested <= 0) return hw;
    return requested < hw ? requested : hw;
#else
    (void)requested;
    return 1;
#endif
}

// Replication engine: runs fn(r, child_stream) for r = 0..reps-1 and returns
// results in index order.  Replication r always receives child stream
// master.child(r), and results land in slot r, so the output is identical
// whether the loop runs serially (threads == 1) or under OpenMP.  The master
// stream must not be drawn from elsewhere.
template <typename T, typename Fn>
std::vector<T> run_replications(int reps, const RngStream& master, int threads, Fn&& fn) {
    std::vector<T> out(reps);
    const int workers = resolve_threads(threads);
    if (workers <= 1) {
        for (int r = 0; r < reps; ++r) out[r] = fn(r, master.child(r));
        return out;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (int r = 0; r < reps; ++r) out[r] = fn(r, master.child(r));
#else
    for (int r = 0; r < reps; ++r) out[r] = fn(r, master.child(r));
#endif
    return out;
}

}  // namespace bvm
