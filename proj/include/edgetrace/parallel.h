#pragma once

#include <functional>

namespace edgetrace {

/// Worker count: requested if > 0, else $EDGETRACE_THREADS, else the hardware count.
int resolve_threads(int requested);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Items are
/// claimed dynamically, so body must write only to slot i of its outputs.
/// The first exception thrown by any body is rethrown after all workers stop.
void parallel_for(int count, int threads, const std::function<void(int)> &body);

// Fixed work decomposition shared by every pass: results never depend on the worker count.
inline constexpr int kTileSize = 16;
inline constexpr int kEdgeChunk = 4096;

} // namespace edgetrace
