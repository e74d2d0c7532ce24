#pragma once

#include <cstddef>
#include <functional>

namespace clasp {

// Worker count: CLASP_THREADS if set and positive, else hardware concurrency.
unsigned threadCount();

// Runs fn(i) for i in [0, n), handing indices out one at a time; fn must
// not touch shared mutable state. The first exception thrown is rethrown.
void parallelFor(std::size_t n, const std::function<void(std::size_t)> &fn);

}  // namespace clasp
