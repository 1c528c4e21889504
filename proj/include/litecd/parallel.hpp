#pragma once

#include <cstddef>
#include <functional>

namespace litecd {

// Worker count, capped by the LITECD_THREADS environment variable when set.
std::size_t worker_count();

// Override the worker count (0 restores the environment/hardware default).
void set_worker_count(std::size_t n);

// Runs body(i) for i in [0, n). Every index is handled by exactly one worker
// and no reduction crosses worker boundaries, so results never depend on the
// worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace litecd
