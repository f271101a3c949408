#pragma once

#include "sdelearn/basis.hpp"
#include "sdelearn/model.hpp"

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace sdelearn {

/// Position of entry (k, j), k <= j, in the packed upper triangle:
/// (0,0), (0,1), ..., (0,d-1), (1,1), ..., (d-1,d-1).
std::size_t packed_index(std::size_t k, std::size_t j, std::size_t d) noexcept;
inline std::size_t packed_size(std::size_t d) noexcept { return d * (d + 1) / 2; }

/// Symmetric PSD root V sqrt(max(L, 0)) V^T of a symmetric matrix.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym);
/// V max(L, 0) V^T, exactly symmetric.
Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& sym, double* max_change = nullptr);

/// Estimated diffusion matrix, constant or expanded entrywise in a basis.
class CovarianceEstimate {
public:
    enum class Form { Constant, StateDependent };

    /// Symmetrises and clamps `raw` to PSD.
    static CovarianceEstimate constant(const Eigen::MatrixXd& raw);
    /// `coeffs` is n × d(d+1)/2, one column per packed upper-triangle entry.
    static CovarianceEstimate state_dependent(std::shared_ptr<const BasisSet> basis, Eigen::MatrixXd coeffs,
                                              bool regularized = false);

    Form form() const noexcept { return form_; }
    std::size_t dim() const noexcept { return dim_; }

    /// Sigma-hat(x): symmetric, eigenvalues clamped at zero.
    Eigen::MatrixXd covariance(std::span<const double> x) const;
    /// Sigma-hat(x) before clamping (still exactly symmetric).
    Eigen::MatrixXd raw(std::span<const double> x) const;

    /// Constant form only.
    const Eigen::MatrixXd& constant_value() const;
    /// Constant form: clamping moved some eigenvalue by more than 1e-6.
    bool clamped() const noexcept { return clamped_; }
    bool regularized() const noexcept { return regularized_; }

    const BasisSet* basis() const noexcept { return basis_.get(); }
    std::shared_ptr<const BasisSet> basis_ptr() const noexcept { return basis_; }
    const Eigen::MatrixXd& coeffs() const noexcept { return coeffs_; }

private:
    CovarianceEstimate() = default;

    Form form_ = Form::Constant;
    std::size_t dim_ = 0;
    Eigen::MatrixXd constant_;
    std::shared_ptr<const BasisSet> basis_;
    Eigen::MatrixXd coeffs_;
    bool clamped_ = false;
    bool regularized_ = false;
};

/// Realised covariation sum_l dx_l dx_l^T, one matrix per trajectory.
std::vector<Eigen::MatrixXd> quadratic_variation(const TrajectoryBundle& bundle);

/// Mean over trajectories of [x, x]_T / T.
CovarianceEstimate estimate_constant(const TrajectoryBundle& bundle);

/// Entrywise least squares: for each k <= j,
/// min_c sum_{m,l} (dx_k dx_j - sum_i c_i psi_i(x_l) dt_l)^2.
CovarianceEstimate estimate_state_dependent(const TrajectoryBundle& bundle, std::shared_ptr<const BasisSet> basis);

/// Symmetric PSD square root of the estimate at x.
Eigen::MatrixXd spectral_sqrt(const CovarianceEstimate& estimate, std::span<const double> x);

}  // namespace sdelearn
