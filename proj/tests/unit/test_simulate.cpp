#include "fixtures.hpp"

#include "sdelearn/error.hpp"
#include "sdelearn/metrics.hpp"
#include "sdelearn/parallel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>

using namespace sdelearn;
using sdelearn::testing::make_model;
using sdelearn::testing::sim;
using sdelearn::testing::uniform_box;

namespace {

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct ThreadGuard {
    std::size_t saved = thread_count();
    ~ThreadGuard() { set_thread_count(saved); }
};

/// Sample mean and variance of x_T with a 3-standard-error check against the
/// exact OU moments x0 e^{-T} and s^2 (1 - e^{-2T}) / 2.
void check_ou(double dt, std::uint64_t seed) {
    const double s = 0.5, T = 1.0;
    const SdeModel ou = make_model({"-x1"}, {"0.5"}, InitialDistribution::point({1.0}));
    const TrajectoryBundle b = euler_maruyama(ou, sim(T, dt, 10000, seed, false));
    const std::size_t M = b.count(), L = b.steps();
    double sum = 0, sum2 = 0;
    for (std::size_t m = 0; m < M; ++m) sum += b.state(m, L - 1)[0];
    const double mean = sum / M;
    for (std::size_t m = 0; m < M; ++m) sum2 += std::pow(b.state(m, L - 1)[0] - mean, 2);
    const double var = sum2 / (M - 1);
    const double true_var = s * s * (1 - std::exp(-2 * T)) / 2;
    EXPECT_LT(std::abs(mean - std::exp(-T)), 3 * std::sqrt(true_var / M)) << "dt " << dt;
    EXPECT_LT(std::abs(var - true_var), 3 * true_var * std::sqrt(2.0 / (M - 1))) << "dt " << dt;
}

}  // namespace

TEST(EulerMaruyama, FrozenWithoutDynamics) {
    const SdeModel m = make_model({"0"}, {"0"}, InitialDistribution::point({3.0}));
    const TrajectoryBundle b = euler_maruyama(m, sim(1.0, 0.1, 3, 1));
    for (double v : b.raw_states()) EXPECT_EQ(v, 3.0);
}

TEST(EulerMaruyama, ConstantDriftIsExact) {
    const SdeModel m = make_model({"2"}, {"0"}, InitialDistribution::point({0.0}));
    const TrajectoryBundle b = euler_maruyama(m, sim(1.0, 0.001, 1, 1));
    EXPECT_NEAR(b.state(0, b.steps() - 1)[0], 2.0, 1e-12);
}

TEST(EulerMaruyama, OuMoments) {
    check_ou(0.01, 11);
    check_ou(0.001, 12);
}

TEST(EulerMaruyama, RecordedNoiseReproducesTheUpdate) {
    const SdeModel m = make_model({"0.4*x1 - 0.1*x1*x2", "-0.8*x2 + 0.2*x1^2"}, {"0.6", "0.2", "0.2", "0.8"},
                                  uniform_box(2, 0, 2));
    const TrajectoryBundle b = euler_maruyama(m, sim(0.1, 0.01, 3, 9));
    for (std::size_t mm = 0; mm < b.count(); ++mm) {
        for (std::size_t l = 0; l + 1 < b.steps(); ++l) {
            const auto x = b.state(mm, l);
            const Eigen::VectorXd f = eval_drift(m, x);
            const Eigen::MatrixXd s = eval_sigma(m, x);
            const auto dw = b.noise(mm, l);
            for (Eigen::Index k = 0; k < 2; ++k) {
                double v = x[k] + f(k) * b.grid().step(l);
                for (Eigen::Index j = 0; j < 2; ++j) v += s(k, j) * dw[j];
                EXPECT_EQ(b.state(mm, l + 1)[k], v);
            }
        }
    }
}

TEST(EulerMaruyama, DeterministicAndSeedSensitive) {
    const SdeModel m = make_model({"2 + 0.08*x1 - 0.01*x1^2"}, {"0.6"}, uniform_box(1, 0, 10));
    const TrajectoryBundle a = euler_maruyama(m, sim(1.0, 0.01, 50, 3));
    const TrajectoryBundle b = euler_maruyama(m, sim(1.0, 0.01, 50, 3));
    const TrajectoryBundle c = euler_maruyama(m, sim(1.0, 0.01, 50, 4));
    EXPECT_TRUE(bit_equal(a.raw_states(), b.raw_states()));
    EXPECT_TRUE(bit_equal(*a.raw_noise(), *b.raw_noise()));
    EXPECT_FALSE(bit_equal(a.raw_states(), c.raw_states()));
}

TEST(EulerMaruyama, IndependentOfThreadCount) {
    ThreadGuard guard;
    const SdeModel m = make_model({"-x1", "x1 - x2"}, {"0.3", "0", "0", "0.2"}, uniform_box(2, -1, 1));
    set_thread_count(1);
    const TrajectoryBundle one = euler_maruyama(m, sim(1.0, 0.01, 77, 5));
    set_thread_count(7);
    const TrajectoryBundle many = euler_maruyama(m, sim(1.0, 0.01, 77, 5));
    EXPECT_TRUE(bit_equal(one.raw_states(), many.raw_states()));
}

TEST(EulerMaruyama, TrajectoriesUseTheirOwnStreams) {
    const SdeModel m = make_model({"-x1"}, {"0.5"}, uniform_box(1, -1, 1));
    const TrajectoryBundle big = euler_maruyama(m, sim(1.0, 0.01, 10, 21));
    const TrajectoryBundle small = euler_maruyama(m, sim(1.0, 0.01, 4, 21));
    for (std::size_t mm = 0; mm < small.count(); ++mm) {
        for (std::size_t l = 0; l < small.steps(); ++l) EXPECT_EQ(small.state(mm, l)[0], big.state(mm, l)[0]);
    }
}

TEST(EulerMaruyama, Errors) {
    const SdeModel blow = make_model({"x1^3"}, {"0"}, InitialDistribution::point({10.0}));
    try {
        euler_maruyama(blow, sim(1.0, 0.1, 1, 1));
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("trajectory 0"), std::string::npos);
    }
    const SdeModel ok = make_model({"0"}, {"1"}, InitialDistribution::point({0.0}));
    EXPECT_THROW(euler_maruyama(ok, sim(1.0, 0.3, 1, 1)), ConfigError);
    EXPECT_THROW(euler_maruyama(ok, sim(1.0, 0.1, 0, 1)), ConfigError);
    const SdeModel domain = make_model({"sqrt(x1)"}, {"0"}, InitialDistribution::point({-1.0}));
    EXPECT_THROW(euler_maruyama(domain, sim(1.0, 0.1, 1, 1)), DomainError);
}

TEST(Replay, TrueDriftIsBitIdentical) {
    const SdeModel m = make_model({"2 + 0.08*x1 - 0.01*x1^2"}, {"0.6"}, uniform_box(1, 0, 10));
    const TrajectoryBundle b = euler_maruyama(m, sim(1.0, 0.01, 20, 8));
    const TrajectoryBundle r = replay(m, b, drift_field(m));
    EXPECT_TRUE(bit_equal(b.raw_states(), r.raw_states()));
    EXPECT_EQ(r.grid(), b.grid());
}

TEST(Replay, ZeroDriftZeroNoiseStaysAtStart) {
    const SdeModel m = make_model({"-x1"}, {"0"}, uniform_box(1, 0, 10));
    const TrajectoryBundle b = euler_maruyama(m, sim(1.0, 0.01, 5, 8));
    const TrajectoryBundle r = replay(m, b, [](std::span<const double>, std::span<double> out) { out[0] = 0.0; });
    for (std::size_t mm = 0; mm < r.count(); ++mm) {
        for (std::size_t l = 0; l < r.steps(); ++l) EXPECT_EQ(r.state(mm, l)[0], b.state(mm, 0)[0]);
    }
}

TEST(Replay, PerturbedDriftGivesSmallPositiveError) {
    const SdeModel m = make_model({"2 + 0.08*x1 - 0.01*x1^2"}, {"0.6"}, uniform_box(1, 0, 10));
    const TrajectoryBundle b = euler_maruyama(m, sim(1.0, 0.001, 200, 8));
    const VectorField f = drift_field(m);
    const TrajectoryBundle r = replay(m, b, [&](std::span<const double> x, std::span<double> out) {
        f(x, out);
        out[0] += 0.01;
    });
    const double e = trajectory_error(b, r).mean;
    EXPECT_GT(e, 0.0);
    EXPECT_LT(e, 0.05);
}

TEST(Replay, RequiresNoiseAndMatchingDimension) {
    const SdeModel m = make_model({"-x1"}, {"1"}, uniform_box(1, 0, 1));
    const TrajectoryBundle quiet = euler_maruyama(m, sim(1.0, 0.1, 2, 1, false));
    EXPECT_THROW(replay(m, quiet, drift_field(m)), ConfigError);
    const SdeModel m2 = make_model({"0", "0"}, {"1", "0", "0", "1"}, uniform_box(2, 0, 1));
    const TrajectoryBundle b2 = euler_maruyama(m2, sim(1.0, 0.1, 2, 1));
    EXPECT_THROW(replay(m, b2, drift_field(m)), ConfigError);
}
