#pragma once

#include "sdelearn/basis.hpp"
#include "sdelearn/model.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <variant>
#include <vector>

namespace sdelearn {

class CovarianceEstimate;

/// Diffusion matrix Sigma = sigma sigma^T as seen by the drift loss.
class CovModel {
public:
    enum class Kind { ConstantMatrix, DiagonalFunctions, FullFunctions, Estimated };

    /// Constant SPD matrix.
    static CovModel constant(Eigen::MatrixXd sigma_sq);
    /// Sigma(x) = diag(variances_k(x)); every variance must stay positive.
    static CovModel diagonal(std::vector<ScalarExpr> variances);
    /// Sigma(x) given entrywise (d*d row-major expressions, symmetric).
    static CovModel full(std::vector<ScalarExpr> entries);
    /// Sigma = sigma sigma^T from the model's diffusion coefficient.
    static CovModel from_diffusion(const SdeModel& model);
    static CovModel estimated(std::shared_ptr<const CovarianceEstimate> estimate);

    Kind kind() const noexcept;
    std::size_t dim() const noexcept { return dim_; }
    /// Off-diagonal entries vanish identically.
    bool is_diagonal() const noexcept;
    /// Independent of the state.
    bool is_constant() const noexcept;

    /// Sigma(x), symmetrised.
    Eigen::MatrixXd evaluate(std::span<const double> x) const;
    /// Diagonal of Sigma(x); only meaningful when is_diagonal().
    void evaluate_diagonal(std::span<const double> x, std::span<double> out) const;

    /// c * Sigma.
    CovModel scaled(double c) const;

private:
    struct Constant { Eigen::MatrixXd value; };
    struct Diagonal { std::vector<ScalarExpr> variances; };
    struct Full { std::vector<ScalarExpr> entries; };
    struct Diffusion { std::vector<ScalarExpr> sigma; bool diagonal; };
    struct Estimated { std::shared_ptr<const CovarianceEstimate> estimate; };
    using Source = std::variant<Constant, Diagonal, Full, Diffusion, Estimated>;

    CovModel(Source source, std::size_t dim) : source_(std::move(source)), dim_(dim) {}

    Source source_;
    std::size_t dim_;
    double scale_ = 1.0;
};

/**
 * Normal equations of the discretised likelihood loss
 *
 *     E(f) = 1/(2TM) sum_{m,l} ( <f(x), S^-1 f(x)> dt_l - 2 <f(x), S^-1 dx_l> ),
 *
 * with f = sum_i a_i psi_i. The loss equals alpha^T A alpha - 2 alpha^T b.
 *
 * PerDimension: A[k], b[k] act on alpha_k = ((a_1)_k, ..., (a_n)_k).
 * Coupled: one system over the stacked unknown, index k*n + i for (a_i)_k.
 */
struct NormalSystem {
    enum class Layout { PerDimension, Coupled };

    Layout layout = Layout::PerDimension;
    std::size_t dim = 0;
    std::size_t basis_size = 0;
    std::vector<Eigen::MatrixXd> A;
    std::vector<Eigen::VectorXd> b;

    /// The system in stacked nd form (block diagonal for PerDimension).
    Eigen::MatrixXd coupled_matrix() const;
    Eigen::VectorXd coupled_rhs() const;
};

/// f(x) = sum_i a_i psi_i(x).
class DriftEstimate {
public:
    DriftEstimate(std::shared_ptr<const BasisSet> basis, Eigen::MatrixXd coeffs, bool regularized = false);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(coeffs_.cols()); }
    std::size_t basis_size() const noexcept { return static_cast<std::size_t>(coeffs_.rows()); }
    const BasisSet& basis() const noexcept { return *basis_; }
    std::shared_ptr<const BasisSet> basis_ptr() const noexcept { return basis_; }
    /// n×d, row i is a_i.
    const Eigen::MatrixXd& coeffs() const noexcept { return coeffs_; }
    bool regularized() const noexcept { return regularized_; }

    void eval(std::span<const double> x, std::span<double> out) const;
    Eigen::VectorXd eval(std::span<const double> x) const;
    VectorField field() const;

private:
    std::shared_ptr<const BasisSet> basis_;
    Eigen::MatrixXd coeffs_;
    bool regularized_;
};

enum class SolverPath { Auto, Diagonal, Full };

/// Per-dimension systems; requires a diagonal covariance.
NormalSystem assemble_diagonal(const TrajectoryBundle& bundle, const BasisSet& basis, const CovModel& cov);

/// Coupled nd×nd system for any invertible covariance.
NormalSystem assemble_full(const TrajectoryBundle& bundle, const BasisSet& basis, const CovModel& cov);

/// Diagonal path when allowed and applicable; `Diagonal` with a non-diagonal
/// covariance is a ConfigError.
NormalSystem assemble(const TrajectoryBundle& bundle, const BasisSet& basis, const CovModel& cov,
                      SolverPath path = SolverPath::Auto);

struct SymmetricSolution {
    Eigen::VectorXd x;
    bool regularized = false;
    double relative_residual = 0.0;
};

/// LDLT solve of a symmetric PSD system. Falls back to A + lambda I with
/// lambda = 1e-10 trace(A)/n when the factorisation is singular or the relative
/// residual exceeds 1e-8. Throws NumericalError if that also fails.
SymmetricSolution solve_symmetric(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

DriftEstimate solve(const NormalSystem& system, std::shared_ptr<const BasisSet> basis);

/// alpha^T A alpha - 2 alpha^T b for n×d coefficients.
double quadratic_loss(const NormalSystem& system, const Eigen::MatrixXd& coeffs);

/// Discretised loss evaluated directly from the data for any drift.
double loss(const TrajectoryBundle& bundle, const VectorField& drift, const CovModel& cov);
double loss(const TrajectoryBundle& bundle, const DriftEstimate& estimate, const CovModel& cov);

/// Normal equations for drifts linear in shared scalar coefficients,
/// f(x) = sum_p c_p F_p(x) with vector-valued features F_p (columns of the
/// d×n matrix written by `features`). `inner_weight` scales every inner
/// product (1/N for the agent-averaged inner product).
struct FeatureSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};
using FeatureMap = std::function<void(std::span<const double>, Eigen::Ref<Eigen::MatrixXd>)>;
FeatureSystem assemble_features(const TrajectoryBundle& bundle, std::size_t n, const FeatureMap& features,
                                const CovModel& cov, double inner_weight = 1.0);

}  // namespace sdelearn
