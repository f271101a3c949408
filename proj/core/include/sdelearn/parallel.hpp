#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace sdelearn {

/// Process-wide worker count used by simulation, assembly and metrics.
/// Results never depend on it: work is split into fixed-size chunks whose
/// outputs are combined in chunk order.
void set_thread_count(std::size_t threads);
std::size_t thread_count() noexcept;

/// Trajectories per work chunk in reductions. Fixed so that partial sums, and
/// therefore the rounding of the final result, do not depend on thread count.
inline constexpr std::size_t kReductionChunk = 32;

inline std::size_t chunk_count(std::size_t items, std::size_t chunk = kReductionChunk) {
    return (items + chunk - 1) / chunk;
}

/// Calls `task(i)` for i in [0, count) on up to thread_count() workers.
/// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task);

/// Computes `compute(c)` for every chunk c in parallel waves and folds the
/// results with `combine` strictly in chunk order, so floating-point sums are
/// identical for every thread count. At most thread_count() partials are alive.
template <class Partial, class Compute, class Combine>
void ordered_reduce(std::size_t chunks, Compute&& compute, Combine&& combine) {
    const std::size_t wave = std::max<std::size_t>(1, thread_count());
    std::vector<std::optional<Partial>> slots(std::min(wave, chunks));
    for (std::size_t start = 0; start < chunks; start += wave) {
        const std::size_t count = std::min(wave, chunks - start);
        parallel_for(count, [&](std::size_t i) { slots[i].emplace(compute(start + i)); });
        for (std::size_t i = 0; i < count; ++i) {
            combine(*slots[i]);
            slots[i].reset();
        }
    }
}

}  // namespace sdelearn
