#pragma once

#include <cstddef>
#include <functional>

namespace layerscope {

// Upper bound on worker threads. Defaults to LAYERSCOPE_THREADS when set,
// otherwise std::thread::hardware_concurrency().
std::size_t max_threads();
void set_max_threads(std::size_t n);
// Back to the LAYERSCOPE_THREADS / hardware default (re-reads the variable).
void reset_max_threads();

// Calls body(i) for every i in [0, n). Work items must write disjoint outputs;
// results are then identical for any thread count. The first exception thrown
// by any item is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace layerscope
