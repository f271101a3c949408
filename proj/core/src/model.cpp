#include "sdelearn/model.hpp"

#include "sdelearn/error.hpp"
#include "sdelearn/rng.hpp"

#include <cmath>
#include <string>

namespace sdelearn {

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 2) throw ConfigError("time grid needs at least 2 points");
    if (times_.front() != 0.0) throw ConfigError("time grid must start at t = 0");
    for (std::size_t l = 0; l + 1 < times_.size(); ++l) {
        if (!(times_[l + 1] > times_[l]) || !std::isfinite(times_[l + 1])) {
            throw ConfigError("time grid not strictly increasing at index " + std::to_string(l + 1));
        }
    }
}

TimeGrid TimeGrid::uniform(double horizon, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("T must be positive");
    const double ratio = horizon / dt;
    const double steps = std::round(ratio);
    if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * steps) {
        throw ConfigError("dt does not divide T (T/dt = " + std::to_string(ratio) + ")");
    }
    const auto n = static_cast<std::size_t>(steps);
    std::vector<double> times(n + 1);
    for (std::size_t l = 0; l <= n; ++l) {
        times[l] = horizon * static_cast<double>(l) / static_cast<double>(n);
    }
    return TimeGrid(std::move(times));
}

std::size_t TimeGrid::nearest(double t) const {
    std::size_t best = 0;
    for (std::size_t l = 1; l < times_.size(); ++l) {
        if (std::abs(times_[l] - t) < std::abs(times_[best] - t)) best = l;
    }
    return best;
}

TrajectoryBundle::TrajectoryBundle(TimeGrid grid, std::size_t dim, std::size_t count,
                                   std::vector<double> states,
                                   std::optional<std::vector<double>> noise)
    : grid_(std::move(grid)), dim_(dim), count_(count), states_(std::move(states)), noise_(std::move(noise)) {
    if (dim_ == 0) throw ConfigError("trajectory dimension must be at least 1");
    if (count_ == 0) throw ConfigError("trajectory bundle is empty");
    if (states_.size() != count_ * grid_.size() * dim_) {
        throw ConfigError("state array has " + std::to_string(states_.size()) + " values, expected " +
                          std::to_string(count_ * grid_.size() * dim_));
    }
    if (noise_ && noise_->size() != count_ * (grid_.size() - 1) * dim_) {
        throw ConfigError("noise array has " + std::to_string(noise_->size()) + " values, expected " +
                          std::to_string(count_ * (grid_.size() - 1) * dim_));
    }
    for (std::size_t i = 0; i < states_.size(); ++i) {
        if (!std::isfinite(states_[i])) {
            const std::size_t m = i / (grid_.size() * dim_);
            const std::size_t l = (i / dim_) % grid_.size();
            throw NumericalError("non-finite state at trajectory " + std::to_string(m) + ", step " +
                                 std::to_string(l));
        }
    }
    if (noise_) {
        for (double v : *noise_) {
            if (!std::isfinite(v)) throw NumericalError("non-finite noise increment");
        }
    }
}

TrajectoryBundle TrajectoryBundle::select(std::span<const std::size_t> trajectories) const {
    const std::size_t block = steps() * dim_;
    const std::size_t noise_block = (steps() - 1) * dim_;
    std::vector<double> states;
    states.reserve(trajectories.size() * block);
    std::optional<std::vector<double>> noise;
    if (noise_) noise.emplace().reserve(trajectories.size() * noise_block);
    for (std::size_t m : trajectories) {
        if (m >= count_) throw ConfigError("trajectory index out of range");
        states.insert(states.end(), states_.begin() + m * block, states_.begin() + (m + 1) * block);
        if (noise_) {
            noise->insert(noise->end(), noise_->begin() + m * noise_block,
                          noise_->begin() + (m + 1) * noise_block);
        }
    }
    return TrajectoryBundle(grid_, dim_, trajectories.size(), std::move(states), std::move(noise));
}

InitialDistribution InitialDistribution::uniform(std::vector<double> lower, std::vector<double> upper) {
    if (lower.empty() || lower.size() != upper.size()) {
        throw ConfigError("uniform initial law needs matching non-empty lower/upper bounds");
    }
    for (std::size_t k = 0; k < lower.size(); ++k) {
        if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]) || lower[k] > upper[k]) {
            throw ConfigError("uniform initial law needs lower <= upper in coordinate " + std::to_string(k + 1));
        }
    }
    return InitialDistribution(Uniform{std::move(lower), std::move(upper)});
}

InitialDistribution InitialDistribution::points(std::vector<std::vector<double>> pts) {
    if (pts.empty() || pts.front().empty()) throw ConfigError("initial point list is empty");
    for (const auto& p : pts) {
        if (p.size() != pts.front().size()) throw ConfigError("initial points have mixed dimensions");
        for (double v : p) {
            if (!std::isfinite(v)) throw ConfigError("initial point is not finite");
        }
    }
    return InitialDistribution(Points{std::move(pts)});
}

std::size_t InitialDistribution::dim() const noexcept {
    if (const auto* u = std::get_if<Uniform>(&law_)) return u->lower.size();
    return std::get<Points>(law_).points.front().size();
}

void InitialDistribution::sample(std::size_t m, GaussianStream& rng, std::span<double> out) const {
    if (const auto* u = std::get_if<Uniform>(&law_)) {
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] = u->lower[k] + (u->upper[k] - u->lower[k]) * rng.uniform();
        }
        return;
    }
    const auto& pts = std::get<Points>(law_).points;
    const auto& p = pts[m % pts.size()];
    std::copy(p.begin(), p.end(), out.begin());
}

SdeModel::SdeModel(std::vector<ScalarExpr> drift, std::vector<ScalarExpr> sigma, InitialDistribution initial)
    : drift_(std::move(drift)), sigma_(std::move(sigma)), initial_(std::move(initial)) {
    const std::size_t d = drift_.size();
    if (d == 0) throw ConfigError("model dimension must be at least 1");
    if (sigma_.size() != d * d) {
        throw ConfigError("sigma must have " + std::to_string(d * d) + " entries, got " +
                          std::to_string(sigma_.size()));
    }
    for (const auto& e : drift_) {
        if (e.arity() != d) throw ConfigError("drift expression arity does not match dimension");
    }
    for (const auto& e : sigma_) {
        if (e.arity() != d) throw ConfigError("sigma expression arity does not match dimension");
    }
    if (initial_.dim() != d) throw ConfigError("initial distribution dimension does not match model");

    // Structural symmetry settles the question without evaluation; otherwise
    // probe a deterministic set of states inside the initial support.
    bool structurally_symmetric = true;
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t j = k + 1; j < d; ++j) {
            if (!(sigma_[k * d + j] == sigma_[j * d + k])) structurally_symmetric = false;
        }
    }
    if (!structurally_symmetric) {
        std::vector<std::vector<double>> probes;
        GaussianStream rng(0x5167a, 0);
        std::vector<double> x(d);
        for (std::size_t i = 0; i < 16; ++i) {
            initial_.sample(i, rng, x);
            probes.push_back(x);
        }
        check_sigma_symmetry(probes);
    }
}

bool SdeModel::has_constant_sigma() const noexcept {
    for (const auto& e : sigma_) {
        if (!e.is_constant()) return false;
    }
    return true;
}

bool SdeModel::has_diagonal_sigma() const noexcept {
    const std::size_t d = dim();
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            if (k != j && !sigma_[k * d + j].is_zero()) return false;
        }
    }
    return true;
}

void SdeModel::check_sigma_symmetry(std::span<const std::vector<double>> points) const {
    for (const auto& p : points) {
        const Eigen::MatrixXd s = eval_sigma(*this, p);
        const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
        if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw ConfigError("sigma is not symmetric at a sampled state");
        }
    }
}

void eval_drift(const SdeModel& model, std::span<const double> x, std::span<double> out) {
    const auto& f = model.drift();
    for (std::size_t k = 0; k < f.size(); ++k) {
        try {
            out[k] = f[k].eval(x);
        } catch (const DomainError& e) {
            throw DomainError("drift component " + std::to_string(k + 1) + ": " + e.what());
        }
    }
}

Eigen::VectorXd eval_drift(const SdeModel& model, std::span<const double> x) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(model.dim()));
    eval_drift(model, x, std::span<double>(out.data(), model.dim()));
    return out;
}

Eigen::MatrixXd eval_sigma(const SdeModel& model, std::span<const double> x) {
    const std::size_t d = model.dim();
    Eigen::MatrixXd s(d, d);
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            try {
                s(k, j) = model.sigma()[k * d + j].eval(x);
            } catch (const DomainError& e) {
                throw DomainError("sigma entry (" + std::to_string(k + 1) + "," + std::to_string(j + 1) +
                                  "): " + e.what());
            }
        }
    }
    return s;
}

VectorField drift_field(const SdeModel& model) {
    return [model](std::span<const double> x, std::span<double> out) { eval_drift(model, x, out); };
}

}  // namespace sdelearn
