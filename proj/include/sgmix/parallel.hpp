#pragma once

#include <cstddef>
#include <utility>

namespace sgmix {

// Reductions over voxels are accumulated per fixed-size chunk and the chunk
// partials combined in index order. The chunk size never depends on the
// thread count, so results are identical for any number of threads.
inline constexpr std::size_t kChunkSize = 2048;

inline std::size_t num_chunks(std::size_t n) {
    return (n + kChunkSize - 1) / kChunkSize;
}

inline std::pair<std::size_t, std::size_t> chunk_range(std::size_t chunk,
                                                       std::size_t n) {
    const std::size_t lo = chunk * kChunkSize;
    const std::size_t hi = lo + kChunkSize < n ? lo + kChunkSize : n;
    return {lo, hi};
}

/// Number of OpenMP threads the data-parallel kernels will use.
int max_threads();

/// Sets the OpenMP thread count for subsequent kernels (no-op without
/// OpenMP). n <= 0 restores the runtime default.
void set_threads(int n);

}  // namespace sgmix
