#pragma once

#include "sdelearn/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sdelearn {

/// All observed states pooled with equal weight 1/(ML).
class EmpiricalRho {
public:
    EmpiricalRho(std::size_t dim, std::vector<double> points);
    static EmpiricalRho from_bundle(const TrajectoryBundle& bundle);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return points_.size() / dim_; }
    std::span<const double> point(std::size_t i) const { return {points_.data() + i * dim_, dim_}; }

private:
    std::size_t dim_;
    std::vector<double> points_;
};

struct FunctionError {
    double absolute = 0.0;
    /// Empty when f_true vanishes on every sample point.
    std::optional<double> relative;
};

/// sqrt(mean |f - f_hat|^2) and its ratio to sqrt(mean |f|^2) over rho.
FunctionError l2_rho_error(const VectorField& f_true, const VectorField& f_hat, const EmpiricalRho& rho);

struct TrajectoryErrorStats {
    double mean = 0.0;
    /// Population standard deviation over trajectories.
    double std = 0.0;
    std::vector<double> per_trajectory;
};

/// e_m = sum_l |x_l - x^_l|^2 dt_l / sum_l |x_l|^2 dt_l, l = 1..L-1, per trajectory.
TrajectoryErrorStats trajectory_error(const TrajectoryBundle& original, const TrajectoryBundle& replayed);

/// States of every trajectory at one time.
struct Snapshot {
    double time = 0.0;
    std::size_t dim = 0;
    std::vector<double> points;

    std::size_t size() const noexcept { return dim == 0 ? 0 : points.size() / dim; }
    std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
};

/// Snapshot at the grid point nearest to t.
Snapshot snapshot(const TrajectoryBundle& bundle, double t);

/// Subsampling seed for snapshot distances; independent of simulation seeds.
inline constexpr std::uint64_t kMetricSeed = 0x5eed0f3a11c0ffeeULL;

struct W2Options {
    /// Points used by the assignment solver in d >= 2.
    std::size_t cap = 1000;
    std::uint64_t seed = kMetricSeed;
    /// Use the assignment solver also in d = 1.
    bool force_assignment = false;
};

/// Wasserstein-2 distance between equal-weight empirical measures. Unequal
/// sizes are reduced to the smaller one by uniform subsampling without
/// replacement.
double wasserstein2(const Snapshot& a, const Snapshot& b, const W2Options& options = {});

}  // namespace sdelearn
