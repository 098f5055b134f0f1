#pragma once

#include <cstddef>
#include <functional>

namespace certfl {

// Process-wide cap on worker threads (0 or 1 means sequential). Results of
// every parallel routine are independent of this setting: work items write
// to their own slots and reductions run in index order afterwards.
void set_max_threads(std::size_t n);
std::size_t max_threads();

// Calls fn(i) for every i in [0, n), possibly from several threads. The first
// exception thrown by any item is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace certfl
