#ifndef HETLOGIT_PARALLEL_HPP
#define HETLOGIT_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace hetlogit {

// Worker count from HETLOGIT_WORKERS, else the hardware concurrency (>= 1).
std::size_t worker_count();

// Runs body(0..n-1) on up to worker_count() threads. Calls made from inside a
// worker run serially, so nested use does not oversubscribe. If any call
// throws, the exception from the lowest index is rethrown after all finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hetlogit

#endif  // HETLOGIT_PARALLEL_HPP
