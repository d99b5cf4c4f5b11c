#pragma once

#include <cstddef>
#include <functional>

namespace bottomup {

/// Worker count: BOTTOMUP_THREADS if set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs fn(0) .. fn(n-1) on up to worker_count() threads. Items are handed
/// out dynamically; results must not depend on which thread runs an item.
/// The first exception thrown by any item is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bottomup
