#pragma once

#include <cstdint>
#include <functional>

namespace sgs {

/// Global worker cap (CLI --threads). Defaults to hardware concurrency.
int max_threads();
void set_max_threads(int n);

// Runs fn(begin, end) over [0, n) split into chunks of fixed `grain`.
// Chunk boundaries depend only on n and grain — never on the worker count —
// so per-chunk partial results can be reduced in chunk order to give
// bit-identical totals for any thread setting.
void parallel_for(int64_t n, int64_t grain, const std::function<void(int64_t, int64_t)>& fn);

} // namespace sgs
