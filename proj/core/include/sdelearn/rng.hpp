#pragma once

#include <cstdint>
#include <random>

namespace sdelearn {

/// SplitMix64 finaliser; used to decorrelate (seed, stream) pairs.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of stream `stream` (trajectory index, replicate, ...) under `seed`.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Per-stream random source: mt19937_64 engine, 53-bit uniforms and
/// Marsaglia polar-method normals. Both transforms are spelled out here rather
/// than taken from <random> distributions, whose algorithms are
/// implementation-defined, so output is identical across standard libraries.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::uint64_t stream);

    /// Uniform in [0, 1).
    double uniform() noexcept;
    /// Standard normal.
    double normal() noexcept;
    std::uint64_t bits() noexcept { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sdelearn
