#pragma once

#include "sdelearn/basis.hpp"
#include "sdelearn/drift_estimator.hpp"
#include "sdelearn/metrics.hpp"
#include "sdelearn/model.hpp"
#include "sdelearn/simulate.hpp"

#include <Eigen/Dense>

#include <memory>

namespace sdelearn {

/**
 * N agents in R^d' with
 *
 *     dx_i = (1/N) sum_{j != i} phi(|x_j - x_i|) (x_j - x_i) dt + sigma dw_i.
 *
 * The stacked state has dimension d = N d'; agent i occupies coordinates
 * [i d', (i+1) d').
 */
struct AgentSystem {
    std::size_t agents = 2;
    std::size_t agent_dim = 1;
    /// Expression in the single variable r.
    ScalarExpr phi;
    /// d'×d' constant diffusion coefficient of each agent (symmetric, SPD).
    Eigen::MatrixXd sigma;
    /// Law of one agent's initial state (dimension d'); agent i of trajectory m
    /// draws with index m*N + i.
    InitialDistribution initial = InitialDistribution::point({0.0});

    void validate() const;
    std::size_t dim() const noexcept { return agents * agent_dim; }
};

Dynamics make_dynamics(const AgentSystem& system);
TrajectoryBundle simulate_agents(const AgentSystem& system, const SimConfig& cfg);

/// Smallest and largest pairwise distance over all pairs, times and trajectories.
std::pair<double, double> distance_range(const TrajectoryBundle& bundle, std::size_t agents, std::size_t agent_dim);

/// phi^(r) = sum_p c_p psi_p(r).
class KernelEstimate {
public:
    KernelEstimate(std::shared_ptr<const BasisSet> basis, Eigen::VectorXd coeffs, bool regularized = false);

    double operator()(double r) const;
    const BasisSet& basis() const noexcept { return *basis_; }
    const Eigen::VectorXd& coeffs() const noexcept { return coeffs_; }
    bool regularized() const noexcept { return regularized_; }

private:
    std::shared_ptr<const BasisSet> basis_;
    Eigen::VectorXd coeffs_;
    bool regularized_;
};

/// Normal equations of the agent-averaged loss over kernel coefficients,
/// accumulated pairwise. `basis_1d` must be one-dimensional.
FeatureSystem assemble_kernel_system(const TrajectoryBundle& bundle, std::size_t agents, std::size_t agent_dim,
                                     const BasisSet& basis_1d, const Eigen::MatrixXd& sigma_agent);

/// The stacked feature map: column p, block i is (1/N) sum_j psi_p(r_ij)(x_j - x_i).
FeatureMap kernel_features(std::size_t agents, std::size_t agent_dim, std::shared_ptr<const BasisSet> basis_1d);

/// Sigma~ = blockdiag(sigma sigma^T, ..., sigma sigma^T).
CovModel block_covariance(std::size_t agents, const Eigen::MatrixXd& sigma_agent);

/// Fits phi^ with a one-dimensional basis on [min, max] of the observed
/// pairwise distances; `spec` supplies kind, degree and knot count (its domain
/// is replaced).
KernelEstimate learn_kernel(const TrajectoryBundle& bundle, std::size_t agents, std::size_t agent_dim,
                            const BasisSpec& spec, const Eigen::MatrixXd& sigma_agent);

/// Stacked drift generated by a scalar kernel.
VectorField kernel_drift(std::size_t agents, std::size_t agent_dim, std::function<double(double)> phi);

/// Relative L2 error of phi^ against phi under the pooled pairwise-distance
/// measure (all i < j, l, m).
FunctionError kernel_error(const TrajectoryBundle& bundle, std::size_t agents, std::size_t agent_dim,
                           const std::function<double(double)>& phi, const KernelEstimate& estimate);

}  // namespace sdelearn
