#include "sdelearn/simulate.hpp"

#include "sdelearn/error.hpp"
#include "sdelearn/parallel.hpp"
#include "sdelearn/rng.hpp"

#include <cmath>
#include <string>

namespace sdelearn {

void SimConfig::validate() const {
    if (M == 0) throw ConfigError("M must be at least 1");
    (void)TimeGrid::uniform(T, dt);
}

TimeGrid SimConfig::grid() const { return TimeGrid::uniform(T, dt); }

Dynamics make_dynamics(const SdeModel& model) {
    Dynamics dyn;
    dyn.dim = model.dim();
    dyn.drift = drift_field(model);
    dyn.diagonal_diffusion = model.has_diagonal_sigma();
    dyn.diffusion = [model](std::span<const double> x, std::span<double> out) {
        const std::size_t d = model.dim();
        for (std::size_t i = 0; i < d * d; ++i) out[i] = model.sigma()[i].eval(x);
    };
    if (model.has_constant_sigma()) {
        // Constant sigma: evaluate once.
        const std::size_t d = model.dim();
        std::vector<double> fixed(d * d);
        std::vector<double> origin(d, 0.0);
        dyn.diffusion(origin, fixed);
        dyn.diffusion = [fixed](std::span<const double>, std::span<double> out) {
            std::copy(fixed.begin(), fixed.end(), out.begin());
        };
    }
    dyn.initial = [init = model.initial()](std::size_t m, GaussianStream& rng, std::span<double> out) {
        init.sample(m, rng, out);
    };
    return dyn;
}

namespace {

/// One trajectory. `noise_in` supplies increments (replay); otherwise they are
/// drawn from `rng` and optionally written to `noise_out`.
void run_trajectory(const Dynamics& dyn, const TimeGrid& grid, std::size_t m, std::span<double> states,
                    GaussianStream* rng, std::span<const double> noise_in, std::span<double> noise_out) {
    const std::size_t d = dyn.dim;
    const std::size_t L = grid.size();
    std::vector<double> f(d);
    std::vector<double> s(d * d);
    std::vector<double> dw(d);

    for (std::size_t l = 0; l + 1 < L; ++l) {
        const std::span<const double> x(states.data() + l * d, d);
        const std::span<double> next(states.data() + (l + 1) * d, d);
        const double h = grid.step(l);
        if (rng != nullptr) {
            const double scale = std::sqrt(h);
            for (std::size_t k = 0; k < d; ++k) dw[k] = scale * rng->normal();
            if (!noise_out.empty()) std::copy(dw.begin(), dw.end(), noise_out.begin() + l * d);
        } else {
            std::copy(noise_in.begin() + l * d, noise_in.begin() + (l + 1) * d, dw.begin());
        }
        try {
            dyn.drift(x, f);
            dyn.diffusion(x, s);
        } catch (const DomainError& e) {
            throw DomainError("trajectory " + std::to_string(m) + ", step " + std::to_string(l) + ": " + e.what());
        }
        for (std::size_t k = 0; k < d; ++k) {
            double v = x[k] + f[k] * h;
            if (dyn.diagonal_diffusion) {
                v += s[k * d + k] * dw[k];
            } else {
                for (std::size_t j = 0; j < d; ++j) v += s[k * d + j] * dw[j];
            }
            if (!std::isfinite(v) || std::abs(v) > dyn.blowup_limit) {
                throw NumericalError("blow-up in trajectory " + std::to_string(m) + " at step " +
                                     std::to_string(l + 1));
            }
            next[k] = v;
        }
    }
}

}  // namespace

TrajectoryBundle integrate(const Dynamics& dyn, const SimConfig& cfg) {
    cfg.validate();
    if (dyn.dim == 0 || !dyn.drift || !dyn.diffusion || !dyn.initial) {
        throw ConfigError("incomplete dynamics");
    }
    const TimeGrid grid = cfg.grid();
    const std::size_t d = dyn.dim;
    const std::size_t L = grid.size();
    const std::size_t block = L * d;
    const std::size_t noise_block = (L - 1) * d;

    std::vector<double> states(cfg.M * block);
    std::optional<std::vector<double>> noise;
    if (cfg.record_noise) noise.emplace(cfg.M * noise_block);

    parallel_for(cfg.M, [&](std::size_t m) {
        GaussianStream rng(cfg.seed, m);
        std::span<double> traj(states.data() + m * block, block);
        dyn.initial(m, rng, traj.first(d));
        for (std::size_t k = 0; k < d; ++k) {
            if (!std::isfinite(traj[k])) throw NumericalError("non-finite initial state in trajectory " + std::to_string(m));
        }
        std::span<double> noise_out;
        if (noise) noise_out = std::span<double>(noise->data() + m * noise_block, noise_block);
        run_trajectory(dyn, grid, m, traj, &rng, {}, noise_out);
    });

    return TrajectoryBundle(grid, d, cfg.M, std::move(states), std::move(noise));
}

TrajectoryBundle euler_maruyama(const SdeModel& model, const SimConfig& cfg) {
    return integrate(make_dynamics(model), cfg);
}

TrajectoryBundle replay(const Dynamics& dynamics, const TrajectoryBundle& bundle, const VectorField& drift) {
    if (!bundle.has_noise()) {
        throw ConfigError("trajectory data has no recorded noise; re-simulate with record_noise enabled");
    }
    if (dynamics.dim != bundle.dim()) {
        throw ConfigError("replay dimension mismatch: dynamics d = " + std::to_string(dynamics.dim) +
                          ", data d = " + std::to_string(bundle.dim()));
    }
    Dynamics dyn = dynamics;
    dyn.drift = drift;

    const std::size_t d = bundle.dim();
    const std::size_t L = bundle.steps();
    const std::size_t block = L * d;
    const std::size_t noise_block = (L - 1) * d;
    std::vector<double> states(bundle.count() * block);

    parallel_for(bundle.count(), [&](std::size_t m) {
        std::span<double> traj(states.data() + m * block, block);
        const auto x0 = bundle.state(m, 0);
        std::copy(x0.begin(), x0.end(), traj.begin());
        const std::span<const double> noise_in(bundle.raw_noise()->data() + m * noise_block, noise_block);
        run_trajectory(dyn, bundle.grid(), m, traj, nullptr, noise_in, {});
    });

    return TrajectoryBundle(bundle.grid(), d, bundle.count(), std::move(states), bundle.raw_noise());
}

TrajectoryBundle replay(const SdeModel& model, const TrajectoryBundle& bundle, const VectorField& drift) {
    return replay(make_dynamics(model), bundle, drift);
}

}  // namespace sdelearn
