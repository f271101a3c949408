#include "sdelearn/metrics.hpp"

#include "sdelearn/assignment.hpp"
#include "sdelearn/error.hpp"
#include "sdelearn/parallel.hpp"
#include "sdelearn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sdelearn {

EmpiricalRho::EmpiricalRho(std::size_t dim, std::vector<double> points) : dim_(dim), points_(std::move(points)) {
    if (dim_ == 0 || points_.empty() || points_.size() % dim_ != 0) {
        throw ConfigError("empirical measure needs a non-empty set of d-dimensional points");
    }
}

EmpiricalRho EmpiricalRho::from_bundle(const TrajectoryBundle& bundle) {
    return EmpiricalRho(bundle.dim(), bundle.raw_states());
}

FunctionError l2_rho_error(const VectorField& f_true, const VectorField& f_hat, const EmpiricalRho& rho) {
    const std::size_t d = rho.dim();
    const std::size_t chunk = 4096;
    struct Sums {
        double diff = 0.0;
        double norm = 0.0;
    };
    Sums total;
    ordered_reduce<Sums>(
        chunk_count(rho.size(), chunk),
        [&](std::size_t c) {
            Sums part;
            std::vector<double> a(d), b(d);
            const std::size_t end = std::min(rho.size(), (c + 1) * chunk);
            for (std::size_t i = c * chunk; i < end; ++i) {
                const auto x = rho.point(i);
                f_true(x, a);
                f_hat(x, b);
                for (std::size_t k = 0; k < d; ++k) {
                    part.diff += (a[k] - b[k]) * (a[k] - b[k]);
                    part.norm += a[k] * a[k];
                }
            }
            return part;
        },
        [&](const Sums& part) {
            total.diff += part.diff;
            total.norm += part.norm;
        });
    const double n = static_cast<double>(rho.size());
    FunctionError out;
    out.absolute = std::sqrt(total.diff / n);
    if (total.norm > 0.0) out.relative = out.absolute / std::sqrt(total.norm / n);
    if (!std::isfinite(out.absolute)) throw NumericalError("L2 error is not finite");
    return out;
}

TrajectoryErrorStats trajectory_error(const TrajectoryBundle& original, const TrajectoryBundle& replayed) {
    if (original.dim() != replayed.dim() || original.count() != replayed.count() ||
        !(original.grid() == replayed.grid())) {
        throw ConfigError("trajectory error needs bundles with the same grid, count and dimension");
    }
    const std::size_t d = original.dim();
    TrajectoryErrorStats out;
    out.per_trajectory.resize(original.count());
    for (std::size_t m = 0; m < original.count(); ++m) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t l = 0; l + 1 < original.steps(); ++l) {
            const double dt = original.grid().step(l);
            const auto x = original.state(m, l);
            const auto y = replayed.state(m, l);
            double e = 0.0;
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                e += (x[k] - y[k]) * (x[k] - y[k]);
                s += x[k] * x[k];
            }
            num += e * dt;
            den += s * dt;
        }
        if (!(den > 0.0)) throw NumericalError("trajectory " + std::to_string(m) + " has zero norm");
        out.per_trajectory[m] = num / den;
    }
    const double M = static_cast<double>(original.count());
    out.mean = std::accumulate(out.per_trajectory.begin(), out.per_trajectory.end(), 0.0) / M;
    double var = 0.0;
    for (double e : out.per_trajectory) var += (e - out.mean) * (e - out.mean);
    out.std = std::sqrt(var / M);
    return out;
}

Snapshot snapshot(const TrajectoryBundle& bundle, double t) {
    const std::size_t l = bundle.grid().nearest(t);
    Snapshot s;
    s.time = bundle.grid()[l];
    s.dim = bundle.dim();
    s.points.reserve(bundle.count() * bundle.dim());
    for (std::size_t m = 0; m < bundle.count(); ++m) {
        const auto x = bundle.state(m, l);
        s.points.insert(s.points.end(), x.begin(), x.end());
    }
    return s;
}

namespace {

/// `k` distinct indices of [0, n), uniformly, in increasing order.
std::vector<std::size_t> subsample(std::size_t n, std::size_t k, std::uint64_t seed, std::uint64_t stream) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (k >= n) return idx;
    GaussianStream rng(seed, stream);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t span = n - i;
        const auto j = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(span));
        std::swap(idx[i], idx[std::min(j, n - 1)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Snapshot take(const Snapshot& s, const std::vector<std::size_t>& idx) {
    Snapshot out;
    out.time = s.time;
    out.dim = s.dim;
    out.points.reserve(idx.size() * s.dim);
    for (std::size_t i : idx) {
        const auto p = s.point(i);
        out.points.insert(out.points.end(), p.begin(), p.end());
    }
    return out;
}

double w2_sorted(const Snapshot& a, const Snapshot& b) {
    std::vector<double> x = a.points;
    std::vector<double> y = b.points;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(acc / static_cast<double>(x.size()));
}

double w2_assignment(const Snapshot& a, const Snapshot& b) {
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto p = a.point(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto q = b.point(static_cast<std::size_t>(j));
            double c = 0.0;
            for (std::size_t k = 0; k < a.dim; ++k) c += (p[k] - q[k]) * (p[k] - q[k]);
            cost(i, j) = c;
        }
    }
    const Assignment sol = solve_assignment(cost);
    return std::sqrt(std::max(0.0, sol.cost) / static_cast<double>(n));
}

void check_snapshot(const Snapshot& s, const char* name) {
    if (s.size() == 0) throw ConfigError(std::string("snapshot ") + name + " is empty");
    for (double v : s.points) {
        if (!std::isfinite(v)) throw NumericalError(std::string("snapshot ") + name + " has non-finite points");
    }
}

}  // namespace

double wasserstein2(const Snapshot& first, const Snapshot& second, const W2Options& options) {
    check_snapshot(first, "a");
    check_snapshot(second, "b");
    if (first.dim != second.dim) throw ConfigError("snapshots have different dimensions");
    // Canonical argument order makes the result exactly symmetric.
    const bool swap = std::lexicographical_compare(second.points.begin(), second.points.end(), first.points.begin(),
                                                   first.points.end());
    const Snapshot& a = swap ? second : first;
    const Snapshot& b = swap ? first : second;
    std::size_t n = std::min(a.size(), b.size());
    const bool assignment = a.dim >= 2 || options.force_assignment;
    if (assignment) {
        if (options.cap == 0) throw ConfigError("W2 point cap must be positive");
        n = std::min(n, options.cap);
    }
    // Streams 0 and 1 keep the two subsamples independent of each other.
    const Snapshot sa = a.size() == n ? a : take(a, subsample(a.size(), n, options.seed, 0));
    const Snapshot sb = b.size() == n ? b : take(b, subsample(b.size(), n, options.seed, 1));
    return assignment ? w2_assignment(sa, sb) : w2_sorted(sa, sb);
}

}  // namespace sdelearn
