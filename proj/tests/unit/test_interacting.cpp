#include "fixtures.hpp"

#include "sdelearn/error.hpp"
#include "sdelearn/interacting.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace sdelearn;
using sdelearn::testing::sim;
using sdelearn::testing::uniform_box;

namespace {

AgentSystem system(std::size_t N, std::size_t dp, const std::string& phi, double sigma, double lo, double hi) {
    AgentSystem s;
    s.agents = N;
    s.agent_dim = dp;
    s.phi = parse_expr(phi, std::vector<std::string>{"r"});
    s.sigma = sigma * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dp), static_cast<Eigen::Index>(dp));
    s.initial = uniform_box(dp, lo, hi);
    return s;
}

/// Same data with agent blocks reordered: new agent i is old agent perm[i].
TrajectoryBundle relabel(const TrajectoryBundle& b, std::size_t dp, const std::vector<std::size_t>& perm) {
    std::vector<double> out(b.raw_states().size());
    const std::size_t d = b.dim();
    for (std::size_t m = 0; m < b.count(); ++m) {
        for (std::size_t l = 0; l < b.steps(); ++l) {
            const auto x = b.state(m, l);
            double* y = out.data() + (m * b.steps() + l) * d;
            for (std::size_t i = 0; i < perm.size(); ++i) {
                for (std::size_t k = 0; k < dp; ++k) y[i * dp + k] = x[perm[i] * dp + k];
            }
        }
    }
    return TrajectoryBundle(b.grid(), d, b.count(), std::move(out));
}

BasisSpec spec_1d(BasisKind kind, int degree, int knots) {
    BasisSpec s;
    s.kind = kind;
    s.degree = degree;
    s.knots_per_dim = {knots};
    return s;
}

}  // namespace

TEST(Agents, FrozenWithoutInteractionOrNoise) {
    const AgentSystem s = system(2, 2, "0", 0.0, -1, 1);
    const TrajectoryBundle b = simulate_agents(s, sim(1.0, 0.1, 3, 1));
    for (std::size_t m = 0; m < b.count(); ++m) {
        for (std::size_t l = 1; l < b.steps(); ++l) {
            for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(b.state(m, l)[k], b.state(m, 0)[k]);
        }
    }
}

TEST(Agents, UnitKernelConservesMidpointAndContracts) {
    // dx1 = (x2 - x1)/2, dx2 = (x1 - x2)/2: the gap obeys dD = -D dt.
    const double dt = 0.001;
    const AgentSystem s = system(2, 1, "1", 0.0, -3, 3);
    const TrajectoryBundle b = simulate_agents(s, sim(1.0, dt, 4, 2));
    for (std::size_t m = 0; m < b.count(); ++m) {
        const auto x0 = b.state(m, 0);
        const double mid0 = 0.5 * (x0[0] + x0[1]), gap0 = x0[1] - x0[0];
        for (std::size_t l = 0; l < b.steps(); ++l) {
            const auto x = b.state(m, l);
            EXPECT_NEAR(0.5 * (x[0] + x[1]), mid0, 1e-12);
            const double t = b.grid()[l];
            EXPECT_NEAR(x[1] - x[0], gap0 * std::exp(-t), std::abs(gap0) * dt);
        }
    }
}

TEST(Agents, KernelDriftMatchesPairwiseSum) {
    const std::size_t N = 4, dp = 3;
    const auto phi = [](double r) { return std::sin(r) + 0.5; };
    const VectorField f = kernel_drift(N, dp, phi);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::vector<double> x(N * dp), out(N * dp);
    for (auto& v : x) v = g(rng);
    f(x, out);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 0; k < dp; ++k) {
            double want = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                double r2 = 0.0;
                for (std::size_t q = 0; q < dp; ++q) r2 += std::pow(x[j * dp + q] - x[i * dp + q], 2);
                want += phi(std::sqrt(r2)) * (x[j * dp + k] - x[i * dp + k]) / N;
            }
            EXPECT_NEAR(out[i * dp + k], want, 1e-14);
        }
    }
}

TEST(Agents, DistanceRange) {
    // Two agents on a line at distances 1 then 3.
    const TrajectoryBundle b(TimeGrid({0.0, 1.0}), 2, 1, {0.0, 1.0, 0.0, 3.0});
    const auto [lo, hi] = distance_range(b, 2, 1);
    EXPECT_EQ(lo, 1.0);
    EXPECT_EQ(hi, 3.0);
    EXPECT_THROW(distance_range(b, 3, 1), ConfigError);
}

TEST(Agents, NoiselessDataIdentifyRepresentableKernel) {
    // Linear phi in a linear basis: increments are exactly f(x) dt.
    const AgentSystem s = system(4, 2, "1.5 - 0.5*r", 0.0, 0, 3);
    const TrajectoryBundle b = simulate_agents(s, sim(0.5, 0.01, 6, 4));
    const KernelEstimate est =
        learn_kernel(b, 4, 2, spec_1d(BasisKind::PiecewisePolynomial, 1, 1), Eigen::MatrixXd::Identity(2, 2));
    const auto [lo, hi] = distance_range(b, 4, 2);
    for (int i = 0; i <= 20; ++i) {
        const double r = lo + (hi - lo) * i / 20.0;
        EXPECT_NEAR(est(r), 1.5 - 0.5 * r, 1e-8);
    }
    const auto err = kernel_error(b, 4, 2, [](double r) { return 1.5 - 0.5 * r; }, est);
    EXPECT_LT(err.absolute, 1e-8);
}

TEST(Agents, KernelIsInvariantToAgentLabels) {
    const AgentSystem s = system(5, 2, "r - 1", 0.5, 0, 4);
    const TrajectoryBundle b = simulate_agents(s, sim(0.5, 0.01, 20, 5));
    const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    const BasisSpec spec = spec_1d(BasisKind::BSpline, 2, 4);
    const KernelEstimate a = learn_kernel(b, 5, 2, spec, s.sigma);
    const KernelEstimate p = learn_kernel(relabel(b, 2, perm), 5, 2, spec, s.sigma);
    EXPECT_LT((a.coeffs() - p.coeffs()).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, a.coeffs().cwiseAbs().maxCoeff()));
}

TEST(Agents, SpecialisedAssemblyMatchesGenericPath) {
    for (std::size_t N = 2; N <= 5; ++N) {
        for (std::size_t dp : {1u, 3u}) {
            const AgentSystem s = system(N, dp, "exp(-r)", 0.3, -2, 2);
            const TrajectoryBundle b = simulate_agents(s, sim(0.3, 0.01, 10, 60 + N));
            const auto [lo, hi] = distance_range(b, N, dp);
            auto basis = std::make_shared<const BasisSet>(
                make_basis(BasisSpec{BasisKind::BSpline, 3, {4}, Domain{{lo}, {hi}}}));
            Eigen::MatrixXd sigma = s.sigma;
            sigma(0, 0) = 0.7;
            const FeatureSystem fast = assemble_kernel_system(b, N, dp, *basis, sigma);
            const FeatureSystem generic = assemble_features(b, basis->size(), kernel_features(N, dp, basis),
                                                            block_covariance(N, sigma), 1.0 / static_cast<double>(N));
            const double scale = std::max(generic.A.cwiseAbs().maxCoeff(), generic.b.cwiseAbs().maxCoeff());
            EXPECT_LT((fast.A - generic.A).cwiseAbs().maxCoeff(), 1e-8 * scale) << "N " << N << " d' " << dp;
            EXPECT_LT((fast.b - generic.b).cwiseAbs().maxCoeff(), 1e-8 * scale) << "N " << N << " d' " << dp;
        }
    }
}

TEST(Agents, BlockCovariance) {
    Eigen::MatrixXd s(2, 2);
    s << 0.5, 0.1, 0.1, 0.3;
    const CovModel c = block_covariance(3, s);
    const Eigen::MatrixXd S = c.evaluate(std::vector<double>(6, 0.0));
    const Eigen::MatrixXd block = s * s.transpose();
    for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) {
            const Eigen::MatrixXd want = i == j ? block : Eigen::MatrixXd::Zero(2, 2);
            EXPECT_LT((S.block(2 * i, 2 * j, 2, 2) - want).cwiseAbs().maxCoeff(), 1e-15);
        }
    }
}

TEST(Agents, Validation) {
    AgentSystem s = system(2, 2, "r", 0.1, 0, 1);
    s.agents = 1;
    EXPECT_THROW(simulate_agents(s, sim(1.0, 0.1, 1, 1)), ConfigError);
    s = system(2, 2, "r", 0.1, 0, 1);
    s.sigma = Eigen::MatrixXd::Identity(3, 3);
    EXPECT_THROW(simulate_agents(s, sim(1.0, 0.1, 1, 1)), ConfigError);
    s = system(2, 2, "r", 0.1, 0, 1);
    s.sigma(0, 1) = 0.2;
    EXPECT_THROW(simulate_agents(s, sim(1.0, 0.1, 1, 1)), ConfigError);
    s = system(2, 2, "r", 0.1, 0, 1);
    s.initial = uniform_box(3, 0, 1);
    EXPECT_THROW(simulate_agents(s, sim(1.0, 0.1, 1, 1)), ConfigError);

    const TrajectoryBundle b = simulate_agents(system(2, 2, "r", 0.1, 0, 1), sim(0.2, 0.1, 2, 1));
    EXPECT_THROW(learn_kernel(b, 3, 2, spec_1d(BasisKind::BSpline, 1, 2), Eigen::MatrixXd::Identity(2, 2)),
                 ConfigError);
    EXPECT_THROW(learn_kernel(b, 2, 2, spec_1d(BasisKind::BSpline, 1, 2), Eigen::MatrixXd::Zero(2, 2)),
                 NumericalError);
}
