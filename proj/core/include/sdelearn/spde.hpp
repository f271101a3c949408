#pragma once

#include "sdelearn/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace sdelearn {

/// Orthonormal eigenfunctions h_k (k = 1, 2, ...) on [lower, upper]; the
/// piecewise parameter switches at `split`.
struct EigenFamily {
    std::function<double(std::size_t, double)> h;
    double lower = 0.0;
    double split = 0.0;
    double upper = 0.0;

    /// h_k(x) = sin(k x / 2) / sqrt(pi) on [0, 2 pi], split at pi.
    static EigenFamily heat_half_sine();
};

/**
 * Fourier modes of du - theta(x) Laplace(u) dt = sigma dW:
 *
 *     dU = -(theta1 B1 + theta2 B2) Lambda U dt + Q dW,  Q = diag(sigma q_k),
 *
 * with B1 + B2 = I for an orthonormal family. The constant form uses the
 * decoupled dynamics du_k = -theta lambda_k u_k dt + sigma q_k dw_k.
 */
struct SpdeSpec {
    enum class Form { Constant, Piecewise };

    std::vector<double> eigenvalues;
    std::vector<double> noise_weights;
    double sigma = 1.0;
    double T = 1.0;
    double dt = 0.01;
    std::size_t M = 1;
    Form form = Form::Constant;
    double theta = 1.0;
    double theta1 = 1.0;
    double theta2 = 1.0;
    EigenFamily family = EigenFamily::heat_half_sine();
    /// Initial modes; zero when empty.
    std::optional<std::vector<double>> initial;

    /// lambda_k = k^2, q_k = 1 (h_k = sin(kx) on [0, pi]).
    static SpdeSpec heat_constant(std::size_t modes, double theta, double sigma, double T, double dt, std::size_t M);
    /// lambda_k = k^2/4, q_k = 1, half-sine family on [0, 2 pi].
    static SpdeSpec heat_piecewise(std::size_t modes, double theta1, double theta2, double sigma, double T, double dt,
                                   std::size_t M);

    std::size_t modes() const noexcept { return eigenvalues.size(); }
    void validate() const;
};

struct CouplingMatrices {
    Eigen::MatrixXd B1;
    Eigen::MatrixXd B2;
};

/// B1(j,k) = int_lower^split h_j h_k, B2 over [split, upper], by composite
/// Gauss–Legendre quadrature refined until successive results agree to 1e-10.
CouplingMatrices compute_coupling(const EigenFamily& family, std::size_t modes);
CouplingMatrices compute_coupling(const SpdeSpec& spec);

/// Euler–Maruyama on the mode system; trajectory m uses stream (seed, m).
TrajectoryBundle simulate_modes(const SpdeSpec& spec, std::uint64_t seed);

/// theta^ = - sum_k (lambda_k/q_k^2) <int u_k du_k> / sum_k (lambda_k^2/q_k^2) <int u_k^2 dt>,
/// left-point sums, <.> the mean over trajectories.
double estimate_theta_constant(const TrajectoryBundle& bundle, const SpdeSpec& spec);

struct PiecewiseThetaEstimate {
    double theta1 = 0.0;
    double theta2 = 0.0;
    /// I_ab = <int (B_a Lambda U)^T S^-1 (B_b Lambda U) dt>, S = diag(sigma^2 q^2).
    Eigen::Matrix2d information;
    /// J_a = <int (B_a Lambda U)^T S^-1 dU>.
    Eigen::Vector2d score;
};

PiecewiseThetaEstimate estimate_theta_piecewise(const TrajectoryBundle& bundle, const SpdeSpec& spec);
PiecewiseThetaEstimate estimate_theta_piecewise(const TrajectoryBundle& bundle, const SpdeSpec& spec,
                                                const CouplingMatrices& coupling);

}  // namespace sdelearn
