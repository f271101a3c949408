#pragma once

#include "config.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sdelearn::cli {

struct GlobalOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
};

/// Input files; empty paths default to the standard names in the output directory.
struct InputFiles {
    std::filesystem::path trajectories;
    std::filesystem::path drift;
};

struct SpdeOptions {
    std::vector<std::size_t> modes{1, 2, 5, 10, 20};
    std::vector<std::size_t> trajectories{1, 10, 50, 100};
    std::optional<double> theta;
    std::optional<double> theta1;
    std::optional<double> theta2;
    std::optional<double> sigma;
    double dt = 0.01;
    double T = 1.0;
    /// Independent replications averaged per cell.
    std::size_t seeds = 1;
};

/// Each command writes into the output directory and a short report to `log`.
/// Errors propagate as ConfigError / NumericalError.
void cmd_simulate(const GlobalOptions& global, std::ostream& log);
void cmd_estimate(const GlobalOptions& global, const InputFiles& files, std::ostream& log);
void cmd_evaluate(const GlobalOptions& global, const InputFiles& files, std::ostream& log);
void cmd_interacting(const GlobalOptions& global, std::ostream& log);
void cmd_spde(const GlobalOptions& global, const SpdeOptions& options, std::ostream& log);

}  // namespace sdelearn::cli
