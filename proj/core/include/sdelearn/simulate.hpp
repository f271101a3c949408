#pragma once

#include "sdelearn/model.hpp"

#include <cstdint>
#include <functional>
#include <limits>

namespace sdelearn {

struct SimConfig {
    double T = 1.0;
    double dt = 0.001;
    std::size_t M = 1;
    std::uint64_t seed = 0;
    bool record_noise = false;

    /// Throws ConfigError on dt <= 0, M == 0, or dt not dividing T.
    void validate() const;
    TimeGrid grid() const;
};

/// Row-major d×d matrix field written into `out` (size d*d).
using MatrixField = std::function<void(std::span<const double>, std::span<double>)>;

/// Draws the initial state of trajectory m.
using InitialSampler = std::function<void(std::size_t, GaussianStream&, std::span<double>)>;

/// Everything the Euler–Maruyama integrator needs to know about a system.
struct Dynamics {
    std::size_t dim = 0;
    VectorField drift;
    MatrixField diffusion;
    /// Diffusion is diagonal; the integrator then only reads the diagonal.
    bool diagonal_diffusion = false;
    InitialSampler initial;
    /// |state component| above this aborts the run. Infinity keeps only the
    /// finiteness check.
    double blowup_limit = 1e12;
};

Dynamics make_dynamics(const SdeModel& model);

/**
 * Euler–Maruyama: x_{l+1} = x_l + f(x_l) h_l + sigma(x_l) dw_l with
 * dw_l ~ N(0, h_l I), sigma evaluated at the left endpoint.
 *
 * Trajectory m draws from its own stream GaussianStream(seed, m): first the
 * initial state, then d normals per step. Output is bit-identical for any
 * thread count and does not change when other trajectories are removed.
 */
TrajectoryBundle integrate(const Dynamics& dynamics, const SimConfig& cfg);

TrajectoryBundle euler_maruyama(const SdeModel& model, const SimConfig& cfg);

/// Re-integrates every trajectory of `bundle` from its own x_0 with `drift` in
/// place of the original drift, driven by the recorded increments.
TrajectoryBundle replay(const Dynamics& dynamics, const TrajectoryBundle& bundle, const VectorField& drift);
TrajectoryBundle replay(const SdeModel& model, const TrajectoryBundle& bundle, const VectorField& drift);

}  // namespace sdelearn
