#pragma once

#include <cstddef>
#include <functional>

namespace trait {

// Runs fn(i) for i in [0, n) across `workers` threads. Work is split by index
// stride so results written into index-addressed slots are identical to a
// sequential run regardless of the worker count. workers <= 1 runs inline.
// The first exception thrown by any worker (lowest index wins) is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

} // namespace trait
