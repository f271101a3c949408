#include "sdelearn/spde.hpp"

#include "sdelearn/error.hpp"
#include "sdelearn/parallel.hpp"
#include "sdelearn/rng.hpp"
#include "sdelearn/simulate.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace sdelearn {

EigenFamily EigenFamily::heat_half_sine() {
    const double norm = 1.0 / std::sqrt(std::numbers::pi);
    return EigenFamily{[norm](std::size_t k, double x) { return norm * std::sin(0.5 * static_cast<double>(k) * x); },
                       0.0, std::numbers::pi, 2.0 * std::numbers::pi};
}

SpdeSpec SpdeSpec::heat_constant(std::size_t modes, double theta, double sigma, double T, double dt, std::size_t M) {
    SpdeSpec s;
    for (std::size_t k = 1; k <= modes; ++k) s.eigenvalues.push_back(static_cast<double>(k * k));
    s.noise_weights.assign(modes, 1.0);
    s.sigma = sigma;
    s.T = T;
    s.dt = dt;
    s.M = M;
    s.form = Form::Constant;
    s.theta = theta;
    s.theta1 = s.theta2 = theta;
    return s;
}

SpdeSpec SpdeSpec::heat_piecewise(std::size_t modes, double theta1, double theta2, double sigma, double T, double dt,
                                  std::size_t M) {
    SpdeSpec s;
    for (std::size_t k = 1; k <= modes; ++k) s.eigenvalues.push_back(static_cast<double>(k * k) / 4.0);
    s.noise_weights.assign(modes, 1.0);
    s.sigma = sigma;
    s.T = T;
    s.dt = dt;
    s.M = M;
    s.form = Form::Piecewise;
    s.theta1 = theta1;
    s.theta2 = theta2;
    s.theta = theta1;
    return s;
}

void SpdeSpec::validate() const {
    if (eigenvalues.empty()) throw ConfigError("spde: at least one mode is required");
    if (noise_weights.size() != eigenvalues.size()) throw ConfigError("spde: one noise weight per mode is required");
    for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
        if (!(eigenvalues[k] > 0.0) || !std::isfinite(eigenvalues[k])) {
            throw ConfigError("spde: eigenvalues must be positive");
        }
        if (k > 0 && !(eigenvalues[k] > eigenvalues[k - 1])) {
            throw ConfigError("spde: eigenvalues must be strictly increasing");
        }
        if (!(noise_weights[k] > 0.0) || !std::isfinite(noise_weights[k])) {
            throw ConfigError("spde: noise weights must be positive");
        }
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("spde: sigma must be positive");
    if (!std::isfinite(theta) || !std::isfinite(theta1) || !std::isfinite(theta2)) {
        throw ConfigError("spde: theta must be finite");
    }
    if (initial && initial->size() != eigenvalues.size()) throw ConfigError("spde: initial state needs one value per mode");
    if (form == Form::Piecewise) {
        if (!family.h) throw ConfigError("spde: piecewise form needs an eigenfunction family");
        if (!(family.lower < family.split && family.split < family.upper)) {
            throw ConfigError("spde: family needs lower < split < upper");
        }
    }
    SimConfig{T, dt, M, 0, false}.validate();
}

namespace {

struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
GaussRule gauss_legendre(std::size_t n) {
    GaussRule rule{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double p2 = (static_cast<double>(2 * k - 1) * x * p1 - static_cast<double>(k - 1) * p0) /
                                  static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-16) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

Eigen::MatrixXd gram_on(const EigenFamily& family, std::size_t modes, double a, double b, std::size_t panels,
                        const GaussRule& rule) {
    const auto N = static_cast<Eigen::Index>(modes);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd h(N);
    const double width = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + static_cast<double>(p) * width;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double x = lo + 0.5 * width * (rule.nodes[q] + 1.0);
            for (Eigen::Index k = 0; k < N; ++k) h[k] = family.h(static_cast<std::size_t>(k) + 1, x);
            G.noalias() += (0.5 * width * rule.weights[q]) * (h * h.transpose());
        }
    }
    return 0.5 * (G + G.transpose());
}

}  // namespace

CouplingMatrices compute_coupling(const EigenFamily& family, std::size_t modes) {
    if (modes == 0) throw ConfigError("coupling needs at least one mode");
    if (!family.h || !(family.lower < family.split && family.split < family.upper)) {
        throw ConfigError("eigenfunction family needs h and lower < split < upper");
    }
    const GaussRule rule = gauss_legendre(8);
    std::size_t panels = 4 * modes;
    CouplingMatrices prev{gram_on(family, modes, family.lower, family.split, panels, rule),
                          gram_on(family, modes, family.split, family.upper, panels, rule)};
    for (int round = 0; round < 8; ++round) {
        panels *= 2;
        CouplingMatrices next{gram_on(family, modes, family.lower, family.split, panels, rule),
                              gram_on(family, modes, family.split, family.upper, panels, rule)};
        const double change = std::max((next.B1 - prev.B1).cwiseAbs().maxCoeff(),
                                       (next.B2 - prev.B2).cwiseAbs().maxCoeff());
        prev = std::move(next);
        if (change <= 1e-10) return prev;
    }
    throw NumericalError("coupling quadrature did not converge to 1e-10");
}

CouplingMatrices compute_coupling(const SpdeSpec& spec) { return compute_coupling(spec.family, spec.modes()); }

TrajectoryBundle simulate_modes(const SpdeSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t N = spec.modes();
    Dynamics dyn;
    dyn.dim = N;
    dyn.diagonal_diffusion = true;
    dyn.blowup_limit = std::numeric_limits<double>::infinity();

    const bool decoupled = spec.form == SpdeSpec::Form::Constant || spec.theta1 == spec.theta2;
    if (decoupled) {
        const double theta = spec.form == SpdeSpec::Form::Constant ? spec.theta : spec.theta1;
        std::vector<double> rate(N);
        for (std::size_t k = 0; k < N; ++k) rate[k] = -theta * spec.eigenvalues[k];
        dyn.drift = [rate](std::span<const double> u, std::span<double> out) {
            for (std::size_t k = 0; k < rate.size(); ++k) out[k] = rate[k] * u[k];
        };
    } else {
        const CouplingMatrices c = compute_coupling(spec);
        const Eigen::VectorXd lambda = Eigen::Map<const Eigen::VectorXd>(spec.eigenvalues.data(),
                                                                        static_cast<Eigen::Index>(N));
        const Eigen::MatrixXd generator = -(spec.theta1 * c.B1 + spec.theta2 * c.B2) * lambda.asDiagonal();
        dyn.drift = [generator](std::span<const double> u, std::span<double> out) {
            const auto n = static_cast<Eigen::Index>(u.size());
            Eigen::Map<Eigen::VectorXd>(out.data(), n).noalias() = generator * Eigen::Map<const Eigen::VectorXd>(u.data(), n);
        };
    }
    std::vector<double> diffusion(N * N, 0.0);
    for (std::size_t k = 0; k < N; ++k) diffusion[k * N + k] = spec.sigma * spec.noise_weights[k];
    dyn.diffusion = [diffusion](std::span<const double>, std::span<double> out) {
        std::copy(diffusion.begin(), diffusion.end(), out.begin());
    };
    const std::vector<double> u0 = spec.initial.value_or(std::vector<double>(N, 0.0));
    dyn.initial = [u0](std::size_t, GaussianStream&, std::span<double> out) {
        std::copy(u0.begin(), u0.end(), out.begin());
    };
    return integrate(dyn, SimConfig{spec.T, spec.dt, spec.M, seed, false});
}

namespace {

void check_modes(const TrajectoryBundle& bundle, const SpdeSpec& spec) {
    if (bundle.dim() != spec.modes()) {
        throw ConfigError("data has " + std::to_string(bundle.dim()) + " modes, spec has " +
                          std::to_string(spec.modes()));
    }
}

}  // namespace

double estimate_theta_constant(const TrajectoryBundle& bundle, const SpdeSpec& spec) {
    check_modes(bundle, spec);
    const std::size_t N = spec.modes();
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        const double lambda = spec.eigenvalues[k];
        const double q2 = spec.noise_weights[k] * spec.noise_weights[k];
        double udu = 0.0;
        double uu = 0.0;
        for (std::size_t m = 0; m < bundle.count(); ++m) {
            for (std::size_t l = 0; l + 1 < bundle.steps(); ++l) {
                const double u = bundle.state(m, l)[k];
                udu += u * (bundle.state(m, l + 1)[k] - u);
                uu += u * u * bundle.grid().step(l);
            }
        }
        const double M = static_cast<double>(bundle.count());
        num += lambda / q2 * udu / M;
        den += lambda * lambda / q2 * uu / M;
    }
    if (!(den > 0.0) || !std::isfinite(den)) throw NumericalError("theta estimator: modes carry no energy");
    return -num / den;
}

PiecewiseThetaEstimate estimate_theta_piecewise(const TrajectoryBundle& bundle, const SpdeSpec& spec) {
    return estimate_theta_piecewise(bundle, spec, compute_coupling(spec));
}

PiecewiseThetaEstimate estimate_theta_piecewise(const TrajectoryBundle& bundle, const SpdeSpec& spec,
                                                const CouplingMatrices& coupling) {
    check_modes(bundle, spec);
    const auto N = static_cast<Eigen::Index>(spec.modes());
    if (coupling.B1.rows() != N || coupling.B2.rows() != N) throw ConfigError("coupling size does not match modes");
    Eigen::VectorXd lambda(N), inv_s(N);
    for (Eigen::Index k = 0; k < N; ++k) {
        const double q = spec.sigma * spec.noise_weights[static_cast<std::size_t>(k)];
        lambda[k] = spec.eigenvalues[static_cast<std::size_t>(k)];
        inv_s[k] = 1.0 / (q * q);
    }
    const Eigen::MatrixXd C1 = coupling.B1 * lambda.asDiagonal();
    const Eigen::MatrixXd C2 = coupling.B2 * lambda.asDiagonal();

    Eigen::Matrix2d I = Eigen::Matrix2d::Zero();
    Eigen::Vector2d J = Eigen::Vector2d::Zero();
    Eigen::VectorXd v1(N), v2(N), du(N);
    for (std::size_t m = 0; m < bundle.count(); ++m) {
        for (std::size_t l = 0; l + 1 < bundle.steps(); ++l) {
            const Eigen::Map<const Eigen::VectorXd> u(bundle.state(m, l).data(), N);
            const Eigen::Map<const Eigen::VectorXd> next(bundle.state(m, l + 1).data(), N);
            const double dt = bundle.grid().step(l);
            v1.noalias() = C1 * u;
            v2.noalias() = C2 * u;
            du = next - u;
            const Eigen::VectorXd w1 = inv_s.cwiseProduct(v1);
            const Eigen::VectorXd w2 = inv_s.cwiseProduct(v2);
            I(0, 0) += w1.dot(v1) * dt;
            I(0, 1) += w1.dot(v2) * dt;
            I(1, 1) += w2.dot(v2) * dt;
            J[0] += w1.dot(du);
            J[1] += w2.dot(du);
        }
    }
    const double M = static_cast<double>(bundle.count());
    I /= M;
    J /= M;
    I(1, 0) = I(0, 1);

    PiecewiseThetaEstimate out;
    out.information = I;
    out.score = J;
    if (!I.allFinite() || !J.allFinite()) throw NumericalError("theta estimator: non-finite information matrix");
    const double det = I(0, 0) * I(1, 1) - I(0, 1) * I(0, 1);
    const double scale = I(0, 0) * I(1, 1);
    if (I(0, 0) < 0.0 || I(1, 1) < 0.0 || det < -1e-10 * scale) {
        throw NumericalError("theta estimator: information matrix is not positive semidefinite");
    }
    if (!(scale > 0.0) || !(std::abs(det) > 1e-14 * scale)) {
        throw NumericalError("theta estimator: information matrix is numerically singular");
    }
    out.theta1 = (-J[0] * I(1, 1) + J[1] * I(0, 1)) / det;
    out.theta2 = (-J[1] * I(0, 0) + J[0] * I(0, 1)) / det;
    return out;
}

}  // namespace sdelearn
