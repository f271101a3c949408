#pragma once

#include "sdelearn/model.hpp"

#include <filesystem>
#include <iosfwd>

namespace sdelearn {

/**
 * Binary trajectory file, little-endian:
 *
 *     char[4] magic "SDET"
 *     u32 version (1), u32 d, u32 L, u32 M, u32 flags (bit 0 = noise present)
 *     f64[L]         timestamps
 *     f64[M][L][d]   states
 *     f64[M][L-1][d] noise increments (only when flag bit 0 is set)
 */
void write_trajectories(std::ostream& out, const TrajectoryBundle& bundle);
void write_trajectories(const std::filesystem::path& path, const TrajectoryBundle& bundle);
TrajectoryBundle read_trajectories(std::istream& in);
TrajectoryBundle read_trajectories(const std::filesystem::path& path);

/// CSV with header `m,t,x1,...,xd`, one row per (trajectory, time).
void write_trajectories_csv(std::ostream& out, const TrajectoryBundle& bundle);
void write_trajectories_csv(const std::filesystem::path& path, const TrajectoryBundle& bundle);

}  // namespace sdelearn
