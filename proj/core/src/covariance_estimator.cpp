#include "sdelearn/covariance_estimator.hpp"

#include "sdelearn/drift_estimator.hpp"
#include "sdelearn/error.hpp"
#include "sdelearn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sdelearn {

std::size_t packed_index(std::size_t k, std::size_t j, std::size_t d) noexcept {
    if (k > j) std::swap(k, j);
    // Rows 0..k-1 hold d, d-1, ..., d-k+1 entries.
    return k * d - k * (k - 1) / 2 + (j - k);
}

Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& sym, double* max_change) {
    const Eigen::MatrixXd s = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of covariance failed");
    const Eigen::VectorXd lambda = eig.eigenvalues();
    const Eigen::VectorXd clamped = lambda.cwiseMax(0.0);
    if (max_change) *max_change = (clamped - lambda).cwiseAbs().maxCoeff();
    if (lambda.minCoeff() >= 0.0) return s;
    Eigen::MatrixXd out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym) {
    const Eigen::MatrixXd s = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of covariance failed");
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd out = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

CovarianceEstimate CovarianceEstimate::constant(const Eigen::MatrixXd& raw) {
    if (raw.rows() == 0 || raw.rows() != raw.cols()) throw ConfigError("covariance must be a non-empty square matrix");
    if (!raw.allFinite()) throw NumericalError("covariance estimate is not finite");
    CovarianceEstimate est;
    est.form_ = Form::Constant;
    est.dim_ = static_cast<std::size_t>(raw.rows());
    double change = 0.0;
    est.constant_ = clamp_psd(raw, &change);
    est.clamped_ = change > 1e-6;
    return est;
}

CovarianceEstimate CovarianceEstimate::state_dependent(std::shared_ptr<const BasisSet> basis, Eigen::MatrixXd coeffs,
                                                       bool regularized) {
    if (!basis) throw ConfigError("state-dependent covariance needs a basis");
    const std::size_t d = basis->dim();
    if (static_cast<std::size_t>(coeffs.rows()) != basis->size() ||
        static_cast<std::size_t>(coeffs.cols()) != packed_size(d)) {
        throw ConfigError("covariance coefficients must be n x d(d+1)/2");
    }
    if (!coeffs.allFinite()) throw NumericalError("covariance coefficients are not finite");
    CovarianceEstimate est;
    est.form_ = Form::StateDependent;
    est.dim_ = d;
    est.basis_ = std::move(basis);
    est.coeffs_ = std::move(coeffs);
    est.regularized_ = regularized;
    return est;
}

Eigen::MatrixXd CovarianceEstimate::raw(std::span<const double> x) const {
    if (form_ == Form::Constant) return constant_;
    const Eigen::VectorXd psi = basis_->eval(x);
    const Eigen::VectorXd packed = coeffs_.transpose() * psi;
    const auto d = static_cast<Eigen::Index>(dim_);
    Eigen::MatrixXd out(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        for (Eigen::Index j = k; j < d; ++j) {
            out(k, j) = out(j, k) = packed[static_cast<Eigen::Index>(
                packed_index(static_cast<std::size_t>(k), static_cast<std::size_t>(j), dim_))];
        }
    }
    return out;
}

Eigen::MatrixXd CovarianceEstimate::covariance(std::span<const double> x) const {
    if (form_ == Form::Constant) return constant_;
    return clamp_psd(raw(x));
}

const Eigen::MatrixXd& CovarianceEstimate::constant_value() const {
    if (form_ != Form::Constant) throw ConfigError("covariance estimate is state-dependent");
    return constant_;
}

std::vector<Eigen::MatrixXd> quadratic_variation(const TrajectoryBundle& bundle) {
    const auto d = static_cast<Eigen::Index>(bundle.dim());
    std::vector<Eigen::MatrixXd> out(bundle.count(), Eigen::MatrixXd::Zero(d, d));
    parallel_for(bundle.count(), [&](std::size_t m) {
        Eigen::MatrixXd& qv = out[m];
        Eigen::VectorXd dx(d);
        for (std::size_t l = 0; l + 1 < bundle.steps(); ++l) {
            const auto a = bundle.state(m, l);
            const auto b = bundle.state(m, l + 1);
            for (Eigen::Index k = 0; k < d; ++k) dx[k] = b[static_cast<std::size_t>(k)] - a[static_cast<std::size_t>(k)];
            qv.noalias() += dx * dx.transpose();
        }
    });
    return out;
}

CovarianceEstimate estimate_constant(const TrajectoryBundle& bundle) {
    const auto qv = quadratic_variation(bundle);
    const auto d = static_cast<Eigen::Index>(bundle.dim());
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d);
    for (const auto& q : qv) mean += q;
    mean /= static_cast<double>(bundle.count()) * bundle.grid().horizon();
    return CovarianceEstimate::constant(mean);
}

CovarianceEstimate estimate_state_dependent(const TrajectoryBundle& bundle, std::shared_ptr<const BasisSet> basis) {
    if (!basis) throw ConfigError("state-dependent covariance needs a basis");
    if (basis->dim() != bundle.dim()) throw ConfigError("covariance basis dimension does not match data dimension");
    const std::size_t d = bundle.dim();
    const auto n = static_cast<Eigen::Index>(basis->size());
    const auto P = static_cast<Eigen::Index>(packed_size(d));

    struct Partial {
        Eigen::MatrixXd gram;
        Eigen::MatrixXd rhs;
    };
    Partial total{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, P)};
    ordered_reduce<Partial>(
        chunk_count(bundle.count()),
        [&](std::size_t chunk) {
            Partial part{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, P)};
            Eigen::VectorXd psi(n);
            std::vector<Eigen::Index> nz;
            std::vector<double> prod(static_cast<std::size_t>(P));
            const std::size_t begin = chunk * kReductionChunk;
            const std::size_t end = std::min(bundle.count(), begin + kReductionChunk);
            for (std::size_t m = begin; m < end; ++m) {
                for (std::size_t l = 0; l + 1 < bundle.steps(); ++l) {
                    const auto x = bundle.state(m, l);
                    const auto y = bundle.state(m, l + 1);
                    const double dt = bundle.grid().step(l);
                    basis->eval(x, std::span<double>(psi.data(), static_cast<std::size_t>(n)));
                    nz.clear();
                    for (Eigen::Index i = 0; i < n; ++i) {
                        if (psi[i] != 0.0) nz.push_back(i);
                    }
                    std::size_t p = 0;
                    for (std::size_t k = 0; k < d; ++k) {
                        for (std::size_t j = k; j < d; ++j) prod[p++] = (y[k] - x[k]) * (y[j] - x[j]);
                    }
                    for (std::size_t a = 0; a < nz.size(); ++a) {
                        const Eigen::Index i = nz[a];
                        const double wi = psi[i] * dt * dt;
                        for (std::size_t c = a; c < nz.size(); ++c) {
                            const Eigen::Index j = nz[c];
                            part.gram(std::min(i, j), std::max(i, j)) += wi * psi[j];
                        }
                        for (Eigen::Index q = 0; q < P; ++q) {
                            part.rhs(i, q) += psi[i] * dt * prod[static_cast<std::size_t>(q)];
                        }
                    }
                }
            }
            return part;
        },
        [&](const Partial& part) {
            total.gram += part.gram;
            total.rhs += part.rhs;
        });
    total.gram.triangularView<Eigen::StrictlyLower>() = total.gram.transpose();

    Eigen::MatrixXd coeffs(n, P);
    bool regularized = false;
    for (Eigen::Index q = 0; q < P; ++q) {
        auto sol = solve_symmetric(total.gram, total.rhs.col(q));
        coeffs.col(q) = sol.x;
        regularized = regularized || sol.regularized;
    }
    return CovarianceEstimate::state_dependent(std::move(basis), std::move(coeffs), regularized);
}

Eigen::MatrixXd spectral_sqrt(const CovarianceEstimate& estimate, std::span<const double> x) {
    return psd_sqrt(estimate.raw(x));
}

}  // namespace sdelearn
