#pragma once

#include "sdelearn/expr.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace sdelearn {

class GaussianStream;

/// Strictly increasing observation instants with t_1 = 0.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> times);

    /// Uniform grid on [0, horizon] with step `dt`; horizon/dt must be an integer
    /// up to 1e-9 relative.
    static TimeGrid uniform(double horizon, double dt);

    std::size_t size() const noexcept { return times_.size(); }
    double horizon() const noexcept { return times_.back(); }
    double operator[](std::size_t l) const { return times_[l]; }
    double step(std::size_t l) const { return times_[l + 1] - times_[l]; }
    const std::vector<double>& times() const noexcept { return times_; }

    /// Index of the grid point closest to `t`.
    std::size_t nearest(double t) const;

    bool operator==(const TimeGrid&) const = default;

private:
    std::vector<double> times_;
};

/// M trajectories of a d-dimensional process on a shared grid, optionally with
/// the Brownian increments that generated them. Layout is row-major with
/// trajectory outermost, then time, then coordinate.
class TrajectoryBundle {
public:
    TrajectoryBundle(TimeGrid grid, std::size_t dim, std::size_t count, std::vector<double> states,
                     std::optional<std::vector<double>> noise = std::nullopt);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t count() const noexcept { return count_; }
    std::size_t steps() const noexcept { return grid_.size(); }
    bool has_noise() const noexcept { return noise_.has_value(); }

    std::span<const double> state(std::size_t m, std::size_t l) const {
        return {states_.data() + (m * steps() + l) * dim_, dim_};
    }
    /// Increment driving the step l -> l+1 of trajectory m.
    std::span<const double> noise(std::size_t m, std::size_t l) const {
        return {noise_->data() + (m * (steps() - 1) + l) * dim_, dim_};
    }

    const std::vector<double>& raw_states() const noexcept { return states_; }
    const std::optional<std::vector<double>>& raw_noise() const noexcept { return noise_; }

    /// Bundle restricted to the listed trajectories, in the given order.
    TrajectoryBundle select(std::span<const std::size_t> trajectories) const;

private:
    TimeGrid grid_;
    std::size_t dim_;
    std::size_t count_;
    std::vector<double> states_;
    std::optional<std::vector<double>> noise_;
};

/// Initial law: per-coordinate Uniform(lower, upper), or a list of fixed points
/// assigned to trajectories round-robin.
class InitialDistribution {
public:
    struct Uniform {
        std::vector<double> lower;
        std::vector<double> upper;
    };
    struct Points {
        std::vector<std::vector<double>> points;
    };

    static InitialDistribution uniform(std::vector<double> lower, std::vector<double> upper);
    static InitialDistribution points(std::vector<std::vector<double>> points);
    static InitialDistribution point(std::vector<double> x) { return points({std::move(x)}); }

    std::size_t dim() const noexcept;
    /// Draws the initial state of trajectory `m` (uniform draws consume `rng`).
    void sample(std::size_t m, GaussianStream& rng, std::span<double> out) const;

    const std::variant<Uniform, Points>& law() const noexcept { return law_; }

private:
    explicit InitialDistribution(std::variant<Uniform, Points> law) : law_(std::move(law)) {}
    std::variant<Uniform, Points> law_;
};

/// dx = f(x) dt + sigma(x) dw with expression-valued f and sigma.
class SdeModel {
public:
    /// `sigma` is d*d expressions in row-major order.
    SdeModel(std::vector<ScalarExpr> drift, std::vector<ScalarExpr> sigma, InitialDistribution initial);

    std::size_t dim() const noexcept { return drift_.size(); }
    const std::vector<ScalarExpr>& drift() const noexcept { return drift_; }
    const std::vector<ScalarExpr>& sigma() const noexcept { return sigma_; }
    const InitialDistribution& initial() const noexcept { return initial_; }

    /// True when every sigma entry is a constant expression.
    bool has_constant_sigma() const noexcept;
    /// True when every off-diagonal sigma entry is the literal 0.
    bool has_diagonal_sigma() const noexcept;

    /// Throws ConfigError if sigma(x) is not symmetric to 1e-12 at any point.
    void check_sigma_symmetry(std::span<const std::vector<double>> points) const;

private:
    std::vector<ScalarExpr> drift_;
    std::vector<ScalarExpr> sigma_;
    InitialDistribution initial_;
};

/// f(x); domain errors are rethrown naming the drift component.
void eval_drift(const SdeModel& model, std::span<const double> x, std::span<double> out);
Eigen::VectorXd eval_drift(const SdeModel& model, std::span<const double> x);

/// sigma(x) as a d×d matrix.
Eigen::MatrixXd eval_sigma(const SdeModel& model, std::span<const double> x);

/// Vector field R^d -> R^d written into `out`.
using VectorField = std::function<void(std::span<const double>, std::span<double>)>;

/// The model drift as a VectorField.
VectorField drift_field(const SdeModel& model);

}  // namespace sdelearn
