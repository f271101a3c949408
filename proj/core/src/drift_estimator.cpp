#include "sdelearn/drift_estimator.hpp"

#include "sdelearn/covariance_estimator.hpp"
#include "sdelearn/error.hpp"
#include "sdelearn/parallel.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace sdelearn {

// ---------------------------------------------------------------- CovModel --

namespace {

void require_square_symmetric(const Eigen::MatrixXd& m) {
    if (m.rows() == 0 || m.rows() != m.cols()) throw ConfigError("covariance must be a non-empty square matrix");
    if (!m.allFinite()) throw ConfigError("covariance has non-finite entries");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw ConfigError("covariance is not symmetric");
}

bool offdiagonal_zero(const Eigen::MatrixXd& m) {
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (k != j && m(k, j) != 0.0) return false;
        }
    }
    return true;
}

bool all_constant(const std::vector<ScalarExpr>& exprs) {
    for (const auto& e : exprs) {
        if (!e.is_constant()) return false;
    }
    return true;
}

/// Inverse of a symmetric matrix through its eigendecomposition; min eigenvalue
/// must exceed 1e-12.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& sigma, const char* context) {
    const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 1e-12)) {
        throw NumericalError(std::string("covariance is singular or indefinite ") + context +
                             " (min eigenvalue " + std::to_string(eig.eigenvalues().minCoeff()) + ")");
    }
    return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

std::string point_label(std::size_t m, std::size_t l) {
    return "at trajectory " + std::to_string(m) + ", step " + std::to_string(l);
}

}  // namespace

CovModel CovModel::constant(Eigen::MatrixXd sigma_sq) {
    require_square_symmetric(sigma_sq);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (sigma_sq + sigma_sq.transpose()));
    if (!(eig.eigenvalues().minCoeff() > 0.0)) throw ConfigError("constant covariance must be positive definite");
    const auto d = static_cast<std::size_t>(sigma_sq.rows());
    return CovModel(Constant{std::move(sigma_sq)}, d);
}

CovModel CovModel::diagonal(std::vector<ScalarExpr> variances) {
    const std::size_t d = variances.size();
    if (d == 0) throw ConfigError("diagonal covariance needs at least one variance");
    for (const auto& v : variances) {
        if (v.arity() != d) throw ConfigError("variance expression arity does not match dimension");
    }
    return CovModel(Diagonal{std::move(variances)}, d);
}

CovModel CovModel::full(std::vector<ScalarExpr> entries) {
    const auto d = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(entries.size()))));
    if (d == 0 || d * d != entries.size()) throw ConfigError("full covariance needs d*d entries");
    for (const auto& v : entries) {
        if (v.arity() != d) throw ConfigError("covariance expression arity does not match dimension");
    }
    return CovModel(Full{std::move(entries)}, d);
}

CovModel CovModel::from_diffusion(const SdeModel& model) {
    const std::size_t d = model.dim();
    if (model.has_constant_sigma()) {
        const std::vector<double> origin(d, 0.0);
        const Eigen::MatrixXd s = eval_sigma(model, origin);
        Eigen::MatrixXd sigma_sq = s * s.transpose();
        // Products of constants: keep off-diagonal zeros exact for diagonal sigma.
        if (model.has_diagonal_sigma()) sigma_sq = Eigen::MatrixXd(sigma_sq.diagonal().asDiagonal());
        return constant(sigma_sq);
    }
    return CovModel(Diffusion{model.sigma(), model.has_diagonal_sigma()}, d);
}

CovModel CovModel::estimated(std::shared_ptr<const CovarianceEstimate> estimate) {
    if (!estimate) throw ConfigError("null covariance estimate");
    const std::size_t d = estimate->dim();
    return CovModel(Estimated{std::move(estimate)}, d);
}

CovModel::Kind CovModel::kind() const noexcept {
    switch (source_.index()) {
        case 0: return Kind::ConstantMatrix;
        case 1: return Kind::DiagonalFunctions;
        case 4: return Kind::Estimated;
        default: return Kind::FullFunctions;
    }
}

bool CovModel::is_diagonal() const noexcept {
    if (dim_ == 1) return true;
    return std::visit(
        [&](const auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return offdiagonal_zero(s.value);
            } else if constexpr (std::is_same_v<T, Diagonal>) {
                return true;
            } else if constexpr (std::is_same_v<T, Full>) {
                for (std::size_t k = 0; k < dim_; ++k) {
                    for (std::size_t j = 0; j < dim_; ++j) {
                        if (k != j && !s.entries[k * dim_ + j].is_zero()) return false;
                    }
                }
                return true;
            } else if constexpr (std::is_same_v<T, Diffusion>) {
                return s.diagonal;
            } else {
                return s.estimate->form() == CovarianceEstimate::Form::Constant &&
                       offdiagonal_zero(s.estimate->constant_value());
            }
        },
        source_);
}

bool CovModel::is_constant() const noexcept {
    return std::visit(
        [](const auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return true;
            } else if constexpr (std::is_same_v<T, Diagonal>) {
                return all_constant(s.variances);
            } else if constexpr (std::is_same_v<T, Full>) {
                return all_constant(s.entries);
            } else if constexpr (std::is_same_v<T, Diffusion>) {
                return all_constant(s.sigma);
            } else {
                return s.estimate->form() == CovarianceEstimate::Form::Constant;
            }
        },
        source_);
}

Eigen::MatrixXd CovModel::evaluate(std::span<const double> x) const {
    const auto d = static_cast<Eigen::Index>(dim_);
    Eigen::MatrixXd out = std::visit(
        [&](const auto& s) -> Eigen::MatrixXd {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return s.value;
            } else if constexpr (std::is_same_v<T, Diagonal>) {
                Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
                for (Eigen::Index k = 0; k < d; ++k) m(k, k) = s.variances[static_cast<std::size_t>(k)].eval(x);
                return m;
            } else if constexpr (std::is_same_v<T, Full>) {
                Eigen::MatrixXd m(d, d);
                for (Eigen::Index k = 0; k < d; ++k) {
                    for (Eigen::Index j = 0; j < d; ++j) {
                        m(k, j) = s.entries[static_cast<std::size_t>(k * d + j)].eval(x);
                    }
                }
                return 0.5 * (m + m.transpose());
            } else if constexpr (std::is_same_v<T, Diffusion>) {
                Eigen::MatrixXd sig(d, d);
                for (Eigen::Index k = 0; k < d; ++k) {
                    for (Eigen::Index j = 0; j < d; ++j) {
                        sig(k, j) = s.sigma[static_cast<std::size_t>(k * d + j)].eval(x);
                    }
                }
                if (s.diagonal) return Eigen::MatrixXd(sig.diagonal().cwiseAbs2().asDiagonal());
                Eigen::MatrixXd m = sig * sig.transpose();
                return 0.5 * (m + m.transpose());
            } else {
                return s.estimate->covariance(x);
            }
        },
        source_);
    if (scale_ != 1.0) out *= scale_;
    return out;
}

void CovModel::evaluate_diagonal(std::span<const double> x, std::span<double> out) const {
    if (const auto* c = std::get_if<Constant>(&source_)) {
        for (std::size_t k = 0; k < dim_; ++k) out[k] = scale_ * c->value(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
        return;
    }
    if (const auto* v = std::get_if<Diagonal>(&source_)) {
        for (std::size_t k = 0; k < dim_; ++k) out[k] = scale_ * v->variances[k].eval(x);
        return;
    }
    if (const auto* s = std::get_if<Diffusion>(&source_); s && s->diagonal) {
        for (std::size_t k = 0; k < dim_; ++k) {
            const double v = s->sigma[k * dim_ + k].eval(x);
            out[k] = scale_ * (v * v);
        }
        return;
    }
    const Eigen::MatrixXd m = evaluate(x);
    for (std::size_t k = 0; k < dim_; ++k) out[k] = m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
}

CovModel CovModel::scaled(double c) const {
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("covariance scale must be positive");
    CovModel copy = *this;
    copy.scale_ *= c;
    return copy;
}

// ------------------------------------------------------------ NormalSystem --

Eigen::MatrixXd NormalSystem::coupled_matrix() const {
    if (layout == Layout::Coupled) return A.front();
    const auto n = static_cast<Eigen::Index>(basis_size);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * static_cast<Eigen::Index>(dim), n * static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) {
        out.block(static_cast<Eigen::Index>(k) * n, static_cast<Eigen::Index>(k) * n, n, n) = A[k];
    }
    return out;
}

Eigen::VectorXd NormalSystem::coupled_rhs() const {
    if (layout == Layout::Coupled) return b.front();
    const auto n = static_cast<Eigen::Index>(basis_size);
    Eigen::VectorXd out(n * static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) out.segment(static_cast<Eigen::Index>(k) * n, n) = b[k];
    return out;
}

// ----------------------------------------------------------- DriftEstimate --

DriftEstimate::DriftEstimate(std::shared_ptr<const BasisSet> basis, Eigen::MatrixXd coeffs, bool regularized)
    : basis_(std::move(basis)), coeffs_(std::move(coeffs)), regularized_(regularized) {
    if (!basis_) throw ConfigError("drift estimate needs a basis");
    if (static_cast<std::size_t>(coeffs_.rows()) != basis_->size() || coeffs_.cols() < 1) {
        throw ConfigError("drift coefficients must be n x d with n = basis size");
    }
    if (!coeffs_.allFinite()) throw NumericalError("drift coefficients are not finite");
}

void DriftEstimate::eval(std::span<const double> x, std::span<double> out) const {
    const std::size_t n = basis_size();
    const std::size_t d = dim();
    constexpr std::size_t kInline = 512;
    double buf[kInline];
    std::vector<double> heap;
    double* psi = buf;
    if (n > kInline) {
        heap.resize(n);
        psi = heap.data();
    }
    basis_->eval(x, std::span<double>(psi, n));
    for (std::size_t k = 0; k < d; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += coeffs_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * psi[i];
        }
        out[k] = acc;
    }
}

Eigen::VectorXd DriftEstimate::eval(std::span<const double> x) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(dim()));
    eval(x, std::span<double>(out.data(), dim()));
    return out;
}

VectorField DriftEstimate::field() const {
    auto self = std::make_shared<const DriftEstimate>(*this);
    return [self](std::span<const double> x, std::span<double> out) { self->eval(x, out); };
}

// ---------------------------------------------------------------- assembly --

namespace {

/// Visits every (m, l) with l < L-1 of the trajectories in reduction chunk `c`.
template <class Fn>
void for_chunk_points(const TrajectoryBundle& bundle, std::size_t chunk, Fn&& fn) {
    const std::size_t begin = chunk * kReductionChunk;
    const std::size_t end = std::min(bundle.count(), begin + kReductionChunk);
    const std::size_t L = bundle.steps();
    for (std::size_t m = begin; m < end; ++m) {
        for (std::size_t l = 0; l + 1 < L; ++l) {
            fn(m, l, bundle.state(m, l), bundle.state(m, l + 1), bundle.grid().step(l));
        }
    }
}

/// Basis values at a point plus the indices where they are non-zero.
struct BasisScratch {
    Eigen::VectorXd psi;
    std::vector<Eigen::Index> nz;

    explicit BasisScratch(std::size_t n) : psi(static_cast<Eigen::Index>(n)) { nz.reserve(n); }

    void load(const BasisSet& basis, std::span<const double> x) {
        basis.eval(x, std::span<double>(psi.data(), static_cast<std::size_t>(psi.size())));
        nz.clear();
        for (Eigen::Index i = 0; i < psi.size(); ++i) {
            if (psi[i] != 0.0) nz.push_back(i);
        }
    }
};

void mirror_upper(Eigen::MatrixXd& m) { m.triangularView<Eigen::StrictlyLower>() = m.transpose(); }

/// Unweighted Gram sum_{m,l} psi psi^T dt (upper triangle) and
/// B(i, k) = sum_{m,l} psi_i dx_k.
struct GramPartial {
    Eigen::MatrixXd gram;
    Eigen::MatrixXd rhs;
};

GramPartial accumulate_gram(const TrajectoryBundle& bundle, const BasisSet& basis) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    const auto d = static_cast<Eigen::Index>(bundle.dim());
    GramPartial total{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, d)};
    ordered_reduce<GramPartial>(
        chunk_count(bundle.count()),
        [&](std::size_t chunk) {
            GramPartial part{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, d)};
            BasisScratch s(basis.size());
            for_chunk_points(bundle, chunk, [&](std::size_t, std::size_t, auto x, auto next, double dt) {
                s.load(basis, x);
                for (std::size_t a = 0; a < s.nz.size(); ++a) {
                    const Eigen::Index i = s.nz[a];
                    const double wi = s.psi[i] * dt;
                    for (std::size_t c = a; c < s.nz.size(); ++c) {
                        const Eigen::Index j = s.nz[c];
                        part.gram(std::min(i, j), std::max(i, j)) += wi * s.psi[j];
                    }
                    for (Eigen::Index k = 0; k < d; ++k) {
                        part.rhs(i, k) += s.psi[i] * (next[static_cast<std::size_t>(k)] - x[static_cast<std::size_t>(k)]);
                    }
                }
            });
            return part;
        },
        [&](const GramPartial& part) {
            total.gram += part.gram;
            total.rhs += part.rhs;
        });
    mirror_upper(total.gram);
    return total;
}

void check_dimensions(const TrajectoryBundle& bundle, const BasisSet& basis, const CovModel& cov) {
    if (basis.dim() != bundle.dim()) {
        throw ConfigError("basis dimension " + std::to_string(basis.dim()) + " does not match data dimension " +
                          std::to_string(bundle.dim()));
    }
    if (cov.dim() != bundle.dim()) {
        throw ConfigError("covariance dimension " + std::to_string(cov.dim()) + " does not match data dimension " +
                          std::to_string(bundle.dim()));
    }
}

double loss_prefactor(const TrajectoryBundle& bundle) {
    return 1.0 / (2.0 * bundle.grid().horizon() * static_cast<double>(bundle.count()));
}

}  // namespace

NormalSystem assemble_diagonal(const TrajectoryBundle& bundle, const BasisSet& basis, const CovModel& cov) {
    check_dimensions(bundle, basis, cov);
    if (!cov.is_diagonal()) throw ConfigError("assemble_diagonal requires a diagonal covariance");
    const std::size_t d = bundle.dim();
    const auto n = static_cast<Eigen::Index>(basis.size());
    const double c = loss_prefactor(bundle);

    NormalSystem sys;
    sys.layout = NormalSystem::Layout::PerDimension;
    sys.dim = d;
    sys.basis_size = basis.size();

    if (cov.is_constant()) {
        std::vector<double> var(d);
        cov.evaluate_diagonal(std::vector<double>(d, 0.0), var);
        for (std::size_t k = 0; k < d; ++k) {
            if (!(var[k] > 0.0)) throw NumericalError("non-positive variance in coordinate " + std::to_string(k + 1));
        }
        const GramPartial g = accumulate_gram(bundle, basis);
        for (std::size_t k = 0; k < d; ++k) {
            sys.A.push_back((c / var[k]) * g.gram);
            sys.b.push_back((c / var[k]) * g.rhs.col(static_cast<Eigen::Index>(k)));
        }
        return sys;
    }

    struct Partial {
        std::vector<Eigen::MatrixXd> A;
        Eigen::MatrixXd B;
    };
    Partial total{std::vector<Eigen::MatrixXd>(d, Eigen::MatrixXd::Zero(n, n)),
                  Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(d))};
    ordered_reduce<Partial>(
        chunk_count(bundle.count()),
        [&](std::size_t chunk) {
            Partial part{std::vector<Eigen::MatrixXd>(d, Eigen::MatrixXd::Zero(n, n)),
                         Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(d))};
            BasisScratch s(basis.size());
            std::vector<double> var(d);
            for_chunk_points(bundle, chunk, [&](std::size_t m, std::size_t l, auto x, auto next, double dt) {
                cov.evaluate_diagonal(x, var);
                s.load(basis, x);
                for (std::size_t k = 0; k < d; ++k) {
                    if (!(var[k] > 0.0)) {
                        throw NumericalError("non-positive variance in coordinate " + std::to_string(k + 1) + " " +
                                             point_label(m, l));
                    }
                    const double w = dt / var[k];
                    const double dx = (next[k] - x[k]) / var[k];
                    auto& A = part.A[k];
                    for (std::size_t a = 0; a < s.nz.size(); ++a) {
                        const Eigen::Index i = s.nz[a];
                        const double wi = w * s.psi[i];
                        for (std::size_t e = a; e < s.nz.size(); ++e) {
                            const Eigen::Index j = s.nz[e];
                            A(std::min(i, j), std::max(i, j)) += wi * s.psi[j];
                        }
                        part.B(i, static_cast<Eigen::Index>(k)) += s.psi[i] * dx;
                    }
                }
            });
            return part;
        },
        [&](const Partial& part) {
            for (std::size_t k = 0; k < d; ++k) total.A[k] += part.A[k];
            total.B += part.B;
        });
    for (std::size_t k = 0; k < d; ++k) {
        mirror_upper(total.A[k]);
        sys.A.push_back(c * total.A[k]);
        sys.b.push_back(c * total.B.col(static_cast<Eigen::Index>(k)));
    }
    return sys;
}

NormalSystem assemble_full(const TrajectoryBundle& bundle, const BasisSet& basis, const CovModel& cov) {
    check_dimensions(bundle, basis, cov);
    const auto d = static_cast<Eigen::Index>(bundle.dim());
    const auto n = static_cast<Eigen::Index>(basis.size());
    const double c = loss_prefactor(bundle);

    NormalSystem sys;
    sys.layout = NormalSystem::Layout::Coupled;
    sys.dim = bundle.dim();
    sys.basis_size = basis.size();

    if (cov.is_constant()) {
        const Eigen::MatrixXd W = spd_inverse(cov.evaluate(std::vector<double>(bundle.dim(), 0.0)), "(constant)");
        const GramPartial g = accumulate_gram(bundle, basis);
        Eigen::MatrixXd A(n * d, n * d);
        for (Eigen::Index k = 0; k < d; ++k) {
            for (Eigen::Index kk = 0; kk < d; ++kk) A.block(k * n, kk * n, n, n) = (c * W(k, kk)) * g.gram;
        }
        const Eigen::MatrixXd weighted = g.rhs * W;  // (i, k) -> sum_k' B(i,k') W(k',k)
        Eigen::VectorXd b(n * d);
        for (Eigen::Index k = 0; k < d; ++k) b.segment(k * n, n) = c * weighted.col(k);
        sys.A.push_back(std::move(A));
        sys.b.push_back(std::move(b));
        return sys;
    }

    struct Partial {
        Eigen::MatrixXd A;
        Eigen::VectorXd b;
    };
    Partial total{Eigen::MatrixXd::Zero(n * d, n * d), Eigen::VectorXd::Zero(n * d)};
    ordered_reduce<Partial>(
        chunk_count(bundle.count()),
        [&](std::size_t chunk) {
            Partial part{Eigen::MatrixXd::Zero(n * d, n * d), Eigen::VectorXd::Zero(n * d)};
            BasisScratch s(basis.size());
            Eigen::VectorXd dx(d);
            for_chunk_points(bundle, chunk, [&](std::size_t m, std::size_t l, auto x, auto next, double dt) {
                const Eigen::MatrixXd W = spd_inverse(cov.evaluate(x), point_label(m, l).c_str());
                for (Eigen::Index k = 0; k < d; ++k) dx[k] = next[static_cast<std::size_t>(k)] - x[static_cast<std::size_t>(k)];
                const Eigen::VectorXd wdx = W * dx;
                s.load(basis, x);
                for (Eigen::Index i : s.nz) {
                    const double wi = s.psi[i] * dt;
                    for (Eigen::Index j : s.nz) {
                        const double pij = wi * s.psi[j];
                        for (Eigen::Index k = 0; k < d; ++k) {
                            for (Eigen::Index kk = 0; kk < d; ++kk) part.A(k * n + i, kk * n + j) += pij * W(k, kk);
                        }
                    }
                    for (Eigen::Index k = 0; k < d; ++k) part.b[k * n + i] += s.psi[i] * wdx[k];
                }
            });
            return part;
        },
        [&](const Partial& part) {
            total.A += part.A;
            total.b += part.b;
        });
    sys.A.push_back(c * total.A);
    sys.b.push_back(c * total.b);
    return sys;
}

NormalSystem assemble(const TrajectoryBundle& bundle, const BasisSet& basis, const CovModel& cov, SolverPath path) {
    switch (path) {
        case SolverPath::Diagonal:
            if (!cov.is_diagonal()) {
                throw ConfigError("diagonal solver requested but the covariance has off-diagonal entries");
            }
            return assemble_diagonal(bundle, basis, cov);
        case SolverPath::Full: return assemble_full(bundle, basis, cov);
        case SolverPath::Auto: break;
    }
    return cov.is_diagonal() ? assemble_diagonal(bundle, basis, cov) : assemble_full(bundle, basis, cov);
}

// ------------------------------------------------------------------- solve --

namespace {

bool factorisation_sound(const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd D = ldlt.vectorD();
    if (!D.allFinite()) return false;
    const double dmax = D.cwiseAbs().maxCoeff();
    if (!(dmax > 0.0)) return false;
    const double tol = static_cast<double>(D.size()) * std::numeric_limits<double>::epsilon() * dmax;
    return D.minCoeff() > tol;
}

double relative_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
    const double r = (A * x - b).norm();
    const double bn = b.norm();
    return bn > 0.0 ? r / bn : r;
}

}  // namespace

SymmetricSolution solve_symmetric(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    if (A.rows() != A.cols() || A.rows() != b.size() || A.rows() == 0) {
        throw ConfigError("solve_symmetric: dimension mismatch");
    }
    SymmetricSolution out;
    {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        if (factorisation_sound(ldlt)) {
            out.x = ldlt.solve(b);
            if (out.x.allFinite()) {
                out.relative_residual = relative_residual(A, out.x, b);
                if (out.relative_residual <= 1e-8) return out;
            }
        }
    }
    const auto n = A.rows();
    const double lambda = 1e-10 * A.trace() / static_cast<double>(n);
    if (!(lambda > 0.0)) throw NumericalError("normal equations are singular and have zero trace");
    const Eigen::MatrixXd shifted = A + lambda * Eigen::MatrixXd::Identity(n, n);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(shifted);
    if (ldlt.info() == Eigen::Success) {
        out.x = ldlt.solve(b);
        out.regularized = true;
        if (out.x.allFinite()) {
            out.relative_residual = relative_residual(shifted, out.x, b);
            if (out.relative_residual <= 1e-8) return out;
        }
    }
    throw NumericalError("normal equations are singular even after ridge regularisation (lambda = " +
                         std::to_string(lambda) + ")");
}

DriftEstimate solve(const NormalSystem& system, std::shared_ptr<const BasisSet> basis) {
    if (!basis || basis->size() != system.basis_size) throw ConfigError("basis does not match the normal system");
    const auto n = static_cast<Eigen::Index>(system.basis_size);
    const auto d = static_cast<Eigen::Index>(system.dim);
    Eigen::MatrixXd coeffs(n, d);
    bool regularized = false;
    if (system.layout == NormalSystem::Layout::PerDimension) {
        for (Eigen::Index k = 0; k < d; ++k) {
            try {
                auto sol = solve_symmetric(system.A[static_cast<std::size_t>(k)], system.b[static_cast<std::size_t>(k)]);
                coeffs.col(k) = sol.x;
                regularized = regularized || sol.regularized;
            } catch (const NumericalError& e) {
                throw NumericalError("coordinate " + std::to_string(k + 1) + ": " + e.what());
            }
        }
    } else {
        auto sol = solve_symmetric(system.A.front(), system.b.front());
        for (Eigen::Index k = 0; k < d; ++k) coeffs.col(k) = sol.x.segment(k * n, n);
        regularized = sol.regularized;
    }
    return DriftEstimate(std::move(basis), std::move(coeffs), regularized);
}

double quadratic_loss(const NormalSystem& system, const Eigen::MatrixXd& coeffs) {
    const auto n = static_cast<Eigen::Index>(system.basis_size);
    if (coeffs.rows() != n || coeffs.cols() != static_cast<Eigen::Index>(system.dim)) {
        throw ConfigError("coefficient shape does not match the normal system");
    }
    if (system.layout == NormalSystem::Layout::PerDimension) {
        double total = 0.0;
        for (std::size_t k = 0; k < system.dim; ++k) {
            const Eigen::VectorXd alpha = coeffs.col(static_cast<Eigen::Index>(k));
            total += alpha.dot(system.A[k] * alpha) - 2.0 * alpha.dot(system.b[k]);
        }
        return total;
    }
    Eigen::VectorXd alpha(coeffs.size());
    for (Eigen::Index k = 0; k < coeffs.cols(); ++k) alpha.segment(k * n, n) = coeffs.col(k);
    return alpha.dot(system.A.front() * alpha) - 2.0 * alpha.dot(system.b.front());
}

double loss(const TrajectoryBundle& bundle, const VectorField& drift, const CovModel& cov) {
    if (cov.dim() != bundle.dim()) throw ConfigError("covariance dimension does not match data");
    const auto d = static_cast<Eigen::Index>(bundle.dim());
    std::optional<Eigen::LDLT<Eigen::MatrixXd>> fixed;
    if (cov.is_constant()) {
        fixed.emplace(cov.evaluate(std::vector<double>(bundle.dim(), 0.0)));
    }
    double total = 0.0;
    ordered_reduce<double>(
        chunk_count(bundle.count()),
        [&](std::size_t chunk) {
            double part = 0.0;
            Eigen::VectorXd f(d), dx(d);
            for_chunk_points(bundle, chunk, [&](std::size_t m, std::size_t l, auto x, auto next, double dt) {
                drift(x, std::span<double>(f.data(), static_cast<std::size_t>(d)));
                for (Eigen::Index k = 0; k < d; ++k) dx[k] = next[static_cast<std::size_t>(k)] - x[static_cast<std::size_t>(k)];
                Eigen::VectorXd y;
                if (fixed) {
                    y = fixed->solve(f);
                } else {
                    Eigen::LDLT<Eigen::MatrixXd> local(cov.evaluate(x));
                    if (local.info() != Eigen::Success) throw NumericalError("singular covariance " + point_label(m, l));
                    y = local.solve(f);
                }
                part += y.dot(f) * dt - 2.0 * y.dot(dx);
            });
            return part;
        },
        [&](double part) { total += part; });
    return loss_prefactor(bundle) * total;
}

double loss(const TrajectoryBundle& bundle, const DriftEstimate& estimate, const CovModel& cov) {
    return loss(bundle, estimate.field(), cov);
}

FeatureSystem assemble_features(const TrajectoryBundle& bundle, std::size_t n, const FeatureMap& features,
                                const CovModel& cov, double inner_weight) {
    if (cov.dim() != bundle.dim()) throw ConfigError("covariance dimension does not match data");
    const auto d = static_cast<Eigen::Index>(bundle.dim());
    const auto nn = static_cast<Eigen::Index>(n);
    std::optional<Eigen::MatrixXd> fixed;
    if (cov.is_constant()) fixed = spd_inverse(cov.evaluate(std::vector<double>(bundle.dim(), 0.0)), "(constant)");

    FeatureSystem total{Eigen::MatrixXd::Zero(nn, nn), Eigen::VectorXd::Zero(nn)};
    ordered_reduce<FeatureSystem>(
        chunk_count(bundle.count()),
        [&](std::size_t chunk) {
            FeatureSystem part{Eigen::MatrixXd::Zero(nn, nn), Eigen::VectorXd::Zero(nn)};
            Eigen::MatrixXd F(d, nn);
            Eigen::VectorXd dx(d);
            for_chunk_points(bundle, chunk, [&](std::size_t m, std::size_t l, auto x, auto next, double dt) {
                F.setZero();
                features(x, F);
                for (Eigen::Index k = 0; k < d; ++k) dx[k] = next[static_cast<std::size_t>(k)] - x[static_cast<std::size_t>(k)];
                const Eigen::MatrixXd W = fixed ? *fixed : spd_inverse(cov.evaluate(x), point_label(m, l).c_str());
                const Eigen::MatrixXd WF = W * F;
                part.A.noalias() += dt * (F.transpose() * WF);
                part.b.noalias() += WF.transpose() * dx;
            });
            return part;
        },
        [&](const FeatureSystem& part) {
            total.A += part.A;
            total.b += part.b;
        });
    const double c = loss_prefactor(bundle) * inner_weight;
    total.A *= c;
    total.b *= c;
    return total;
}

}  // namespace sdelearn
