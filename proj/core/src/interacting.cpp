#include "sdelearn/interacting.hpp"

#include "sdelearn/error.hpp"
#include "sdelearn/parallel.hpp"
#include "sdelearn/rng.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace sdelearn {

namespace {

void check_layout(const TrajectoryBundle& bundle, std::size_t agents, std::size_t agent_dim) {
    if (agents < 2 || agent_dim < 1) throw ConfigError("agent system needs N >= 2 agents of dimension >= 1");
    if (bundle.dim() != agents * agent_dim) {
        throw ConfigError("data dimension " + std::to_string(bundle.dim()) + " is not N*d' = " +
                          std::to_string(agents * agent_dim));
    }
}

double distance(std::span<const double> x, std::size_t i, std::size_t j, std::size_t dp) {
    double s = 0.0;
    for (std::size_t a = 0; a < dp; ++a) {
        const double u = x[j * dp + a] - x[i * dp + a];
        s += u * u;
    }
    return std::sqrt(s);
}

}  // namespace

void AgentSystem::validate() const {
    if (agents < 2) throw ConfigError("agents: N must be >= 2");
    if (agent_dim < 1) throw ConfigError("agent_dim must be >= 1");
    if (phi.arity() != 1) throw ConfigError("phi must be an expression in r only");
    const auto dp = static_cast<Eigen::Index>(agent_dim);
    if (sigma.rows() != dp || sigma.cols() != dp) throw ConfigError("sigma must be agent_dim x agent_dim");
    if (!sigma.allFinite()) throw ConfigError("sigma has non-finite entries");
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ConfigError("sigma must be symmetric");
    if (initial.dim() != agent_dim) throw ConfigError("initial distribution must have dimension agent_dim");
}

VectorField kernel_drift(std::size_t agents, std::size_t agent_dim, std::function<double(double)> phi) {
    const double inv_n = 1.0 / static_cast<double>(agents);
    return [agents, agent_dim, inv_n, phi = std::move(phi)](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < agents; ++i) {
            for (std::size_t j = i + 1; j < agents; ++j) {
                const double w = inv_n * phi(distance(x, i, j, agent_dim));
                for (std::size_t a = 0; a < agent_dim; ++a) {
                    const double u = w * (x[j * agent_dim + a] - x[i * agent_dim + a]);
                    out[i * agent_dim + a] += u;
                    out[j * agent_dim + a] -= u;
                }
            }
        }
    };
}

Dynamics make_dynamics(const AgentSystem& system) {
    system.validate();
    const std::size_t N = system.agents;
    const std::size_t dp = system.agent_dim;
    const std::size_t d = N * dp;
    Dynamics dyn;
    dyn.dim = d;
    auto phi = std::make_shared<const ScalarExpr>(system.phi);
    dyn.drift = kernel_drift(N, dp, [phi](double r) { return phi->eval(std::span<const double>(&r, 1)); });

    std::vector<double> block(d * d, 0.0);
    bool diagonal = true;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t a = 0; a < dp; ++a) {
            for (std::size_t b = 0; b < dp; ++b) {
                const double v = system.sigma(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                block[(i * dp + a) * d + i * dp + b] = v;
                if (a != b && v != 0.0) diagonal = false;
            }
        }
    }
    dyn.diagonal_diffusion = diagonal;
    dyn.diffusion = [block = std::move(block)](std::span<const double>, std::span<double> out) {
        std::copy(block.begin(), block.end(), out.begin());
    };
    dyn.initial = [initial = system.initial, N, dp](std::size_t m, GaussianStream& rng, std::span<double> out) {
        for (std::size_t i = 0; i < N; ++i) initial.sample(m * N + i, rng, out.subspan(i * dp, dp));
    };
    return dyn;
}

TrajectoryBundle simulate_agents(const AgentSystem& system, const SimConfig& cfg) {
    return integrate(make_dynamics(system), cfg);
}

std::pair<double, double> distance_range(const TrajectoryBundle& bundle, std::size_t agents, std::size_t agent_dim) {
    check_layout(bundle, agents, agent_dim);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < bundle.count(); ++m) {
        for (std::size_t l = 0; l < bundle.steps(); ++l) {
            const auto x = bundle.state(m, l);
            for (std::size_t i = 0; i < agents; ++i) {
                for (std::size_t j = i + 1; j < agents; ++j) {
                    const double r = distance(x, i, j, agent_dim);
                    lo = std::min(lo, r);
                    hi = std::max(hi, r);
                }
            }
        }
    }
    return {lo, hi};
}

KernelEstimate::KernelEstimate(std::shared_ptr<const BasisSet> basis, Eigen::VectorXd coeffs, bool regularized)
    : basis_(std::move(basis)), coeffs_(std::move(coeffs)), regularized_(regularized) {
    if (!basis_ || basis_->dim() != 1) throw ConfigError("kernel estimate needs a one-dimensional basis");
    if (static_cast<std::size_t>(coeffs_.size()) != basis_->size()) {
        throw ConfigError("kernel coefficients do not match the basis size");
    }
    if (!coeffs_.allFinite()) throw NumericalError("kernel coefficients are not finite");
}

double KernelEstimate::operator()(double r) const {
    return basis_->eval(std::span<const double>(&r, 1)).dot(coeffs_);
}

FeatureSystem assemble_kernel_system(const TrajectoryBundle& bundle, std::size_t agents, std::size_t agent_dim,
                                     const BasisSet& basis_1d, const Eigen::MatrixXd& sigma_agent) {
    check_layout(bundle, agents, agent_dim);
    if (basis_1d.dim() != 1) throw ConfigError("kernel basis must be one-dimensional");
    const auto dp = static_cast<Eigen::Index>(agent_dim);
    if (sigma_agent.rows() != dp || sigma_agent.cols() != dp) throw ConfigError("sigma must be agent_dim x agent_dim");
    const Eigen::MatrixXd S = sigma_agent * sigma_agent.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (S + S.transpose()));
    if (!(eig.eigenvalues().minCoeff() > 1e-12)) throw NumericalError("agent covariance is singular");
    const Eigen::MatrixXd W =
        eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();

    const auto n = static_cast<Eigen::Index>(basis_1d.size());
    const double inv_n = 1.0 / static_cast<double>(agents);
    const std::size_t N = agents;

    FeatureSystem total{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
    ordered_reduce<FeatureSystem>(
        chunk_count(bundle.count()),
        [&](std::size_t chunk) {
            FeatureSystem part{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
            // G[i] is the d'×n feature block of agent i, before the 1/N factor.
            std::vector<Eigen::MatrixXd> G(N, Eigen::MatrixXd::Zero(dp, n));
            Eigen::VectorXd psi(n);
            Eigen::VectorXd u(dp), dx(dp);
            Eigen::MatrixXd WG(dp, n);
            const std::size_t begin = chunk * kReductionChunk;
            const std::size_t end = std::min(bundle.count(), begin + kReductionChunk);
            for (std::size_t m = begin; m < end; ++m) {
                for (std::size_t l = 0; l + 1 < bundle.steps(); ++l) {
                    const auto x = bundle.state(m, l);
                    const auto y = bundle.state(m, l + 1);
                    const double dt = bundle.grid().step(l);
                    for (auto& g : G) g.setZero();
                    for (std::size_t i = 0; i < N; ++i) {
                        for (std::size_t j = i + 1; j < N; ++j) {
                            double r2 = 0.0;
                            for (Eigen::Index a = 0; a < dp; ++a) {
                                u[a] = x[j * agent_dim + static_cast<std::size_t>(a)] -
                                       x[i * agent_dim + static_cast<std::size_t>(a)];
                                r2 += u[a] * u[a];
                            }
                            const double r = std::sqrt(r2);
                            basis_1d.eval(std::span<const double>(&r, 1),
                                          std::span<double>(psi.data(), static_cast<std::size_t>(n)));
                            for (Eigen::Index p = 0; p < n; ++p) {
                                if (psi[p] == 0.0) continue;
                                G[i].col(p) += psi[p] * u;
                                G[j].col(p) -= psi[p] * u;
                            }
                        }
                    }
                    // <F_p, S^-1 F_q>_N with F = G / N.
                    const double wa = inv_n * inv_n * inv_n * dt;
                    const double wb = inv_n * inv_n;
                    for (std::size_t i = 0; i < N; ++i) {
                        for (Eigen::Index a = 0; a < dp; ++a) {
                            dx[a] = y[i * agent_dim + static_cast<std::size_t>(a)] -
                                    x[i * agent_dim + static_cast<std::size_t>(a)];
                        }
                        WG.noalias() = W * G[i];
                        part.A.noalias() += wa * (G[i].transpose() * WG);
                        part.b.noalias() += wb * (WG.transpose() * dx);
                    }
                }
            }
            return part;
        },
        [&](const FeatureSystem& part) {
            total.A += part.A;
            total.b += part.b;
        });
    const double c = 1.0 / (2.0 * bundle.grid().horizon() * static_cast<double>(bundle.count()));
    total.A *= c;
    total.b *= c;
    total.A = 0.5 * (total.A + total.A.transpose());
    return total;
}

FeatureMap kernel_features(std::size_t agents, std::size_t agent_dim, std::shared_ptr<const BasisSet> basis_1d) {
    if (!basis_1d || basis_1d->dim() != 1) throw ConfigError("kernel basis must be one-dimensional");
    return [agents, agent_dim, basis = std::move(basis_1d)](std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> F) {
        const std::size_t n = basis->size();
        const double inv_n = 1.0 / static_cast<double>(agents);
        Eigen::VectorXd psi(static_cast<Eigen::Index>(n));
        F.setZero();
        for (std::size_t i = 0; i < agents; ++i) {
            for (std::size_t j = 0; j < agents; ++j) {
                if (j == i) continue;
                const double r = distance(x, i, j, agent_dim);
                basis->eval(std::span<const double>(&r, 1), std::span<double>(psi.data(), n));
                for (std::size_t p = 0; p < n; ++p) {
                    for (std::size_t a = 0; a < agent_dim; ++a) {
                        F(static_cast<Eigen::Index>(i * agent_dim + a), static_cast<Eigen::Index>(p)) +=
                            inv_n * psi[static_cast<Eigen::Index>(p)] * (x[j * agent_dim + a] - x[i * agent_dim + a]);
                    }
                }
            }
        }
    };
}

CovModel block_covariance(std::size_t agents, const Eigen::MatrixXd& sigma_agent) {
    const Eigen::MatrixXd S = sigma_agent * sigma_agent.transpose();
    const auto dp = S.rows();
    const auto d = dp * static_cast<Eigen::Index>(agents);
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < agents; ++i) {
        full.block(static_cast<Eigen::Index>(i) * dp, static_cast<Eigen::Index>(i) * dp, dp, dp) = S;
    }
    return CovModel::constant(0.5 * (full + full.transpose()));
}

KernelEstimate learn_kernel(const TrajectoryBundle& bundle, std::size_t agents, std::size_t agent_dim,
                            const BasisSpec& spec, const Eigen::MatrixXd& sigma_agent) {
    const auto [lo, hi] = distance_range(bundle, agents, agent_dim);
    BasisSpec s = spec;
    if (s.knots_per_dim.empty()) throw ConfigError("kernel basis needs knots_per_dim");
    s.knots_per_dim.resize(1);
    s.domain = hi > lo ? Domain{{lo}, {hi}} : Domain{{lo - 0.5}, {hi + 0.5}};
    auto basis = std::make_shared<const BasisSet>(make_basis(s));
    const FeatureSystem sys = assemble_kernel_system(bundle, agents, agent_dim, *basis, sigma_agent);
    const SymmetricSolution sol = solve_symmetric(sys.A, sys.b);
    return KernelEstimate(std::move(basis), sol.x, sol.regularized);
}

FunctionError kernel_error(const TrajectoryBundle& bundle, std::size_t agents, std::size_t agent_dim,
                           const std::function<double(double)>& phi, const KernelEstimate& estimate) {
    check_layout(bundle, agents, agent_dim);
    struct Sums {
        double diff = 0.0;
        double norm = 0.0;
        double count = 0.0;
    };
    Sums total;
    ordered_reduce<Sums>(
        chunk_count(bundle.count()),
        [&](std::size_t chunk) {
            Sums part;
            const std::size_t begin = chunk * kReductionChunk;
            const std::size_t end = std::min(bundle.count(), begin + kReductionChunk);
            for (std::size_t m = begin; m < end; ++m) {
                for (std::size_t l = 0; l < bundle.steps(); ++l) {
                    const auto x = bundle.state(m, l);
                    for (std::size_t i = 0; i < agents; ++i) {
                        for (std::size_t j = i + 1; j < agents; ++j) {
                            const double r = distance(x, i, j, agent_dim);
                            const double a = phi(r);
                            const double e = a - estimate(r);
                            part.diff += e * e;
                            part.norm += a * a;
                            part.count += 1.0;
                        }
                    }
                }
            }
            return part;
        },
        [&](const Sums& part) {
            total.diff += part.diff;
            total.norm += part.norm;
            total.count += part.count;
        });
    FunctionError out;
    out.absolute = std::sqrt(total.diff / total.count);
    if (total.norm > 0.0) out.relative = out.absolute / std::sqrt(total.norm / total.count);
    return out;
}

}  // namespace sdelearn
