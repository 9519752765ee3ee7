#pragma once

#include <cstddef>
#include <functional>

namespace cmbert {

// Worker cap: min(hardware_concurrency, CMBERT_THREADS) when the env var is
// set, else hardware_concurrency. Stable for the lifetime of the process so
// chunked reductions stay deterministic.
std::size_t worker_count();

// Runs fn(i) for i in [0, n), partitioned into contiguous chunks, one worker
// per chunk. Chunk boundaries depend only on (n, worker_count()), never on
// scheduling, so any order-sensitive caller can reduce per-chunk results in
// index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Same partition as parallel_for, but hands each worker its chunk range plus
// its chunk index (for per-chunk accumulators).
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t chunk, std::size_t begin,
                                              std::size_t end)>& fn);

std::size_t chunk_count(std::size_t n);

}  // namespace cmbert
