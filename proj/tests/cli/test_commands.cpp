// Runs the built executable end to end in scratch directories.

#include "fixtures.hpp"

#include "sdelearn/covariance_estimator.hpp"
#include "sdelearn/estimate_io.hpp"
#include "sdelearn/trajectory_io.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace sdelearn;

namespace {

struct RunResult {
    int code = -1;
    std::string output;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("sdelearn_cli_" + std::string(info->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    RunResult run(const std::string& args) {
        const fs::path log = dir_ / "log.txt";
        const std::string cmd = std::string("\"") + SDELEARN_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
    }

    fs::path dir_;
};

const char* kOu = R"(
model:
  dim: 1
  drift: ["-x1"]
  sigma: [[0.5]]
  initial: {kind: uniform, lower: -1, upper: 1}
simulate: {T: 1, dt: 0.01, M: 200, seed: 3}
basis: {kind: bspline, degree: 2, knots_per_dim: 8}
evaluate: {times: [0.25, 0.5, 1.0]}
)";

std::map<std::string, double> read_summary(const fs::path& csv) {
    std::map<std::string, double> out;
    std::istringstream in(slurp(csv));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    }
    return out;
}

}  // namespace

TEST_F(CliTest, SimulateIsByteDeterministic) {
    const fs::path cfg = write_config("ou.yaml", kOu);
    const fs::path a = dir_ / "a", b = dir_ / "b";
    ASSERT_EQ(run("--config " + cfg.string() + " --out " + a.string() + " --threads 1 simulate").code, 0);
    ASSERT_EQ(run("--config " + cfg.string() + " --out " + b.string() + " --threads 4 simulate").code, 0);
    EXPECT_EQ(slurp(a / "trajectories.bin"), slurp(b / "trajectories.bin"));
    EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));

    const TrajectoryBundle bundle = read_trajectories(a / "trajectories.bin");
    EXPECT_EQ(bundle.dim(), 1u);
    EXPECT_EQ(bundle.steps(), 101u);
    EXPECT_EQ(bundle.count(), 200u);
    EXPECT_TRUE(bundle.has_noise());
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
    const fs::path cfg = write_config("ou.yaml", kOu);
    ASSERT_EQ(run("--config " + cfg.string() + " --out " + (dir_ / "a").string() + " simulate").code, 0);
    ASSERT_EQ(run("--config " + cfg.string() + " --out " + (dir_ / "b").string() + " --seed 99 simulate").code, 0);
    EXPECT_NE(slurp(dir_ / "a" / "trajectories.bin"), slurp(dir_ / "b" / "trajectories.bin"));
    EXPECT_NE(slurp(dir_ / "b" / "manifest.json").find("\"seed\": 99"), std::string::npos);
}

TEST_F(CliTest, ZeroNoiseGivesZeroQuadraticVariation) {
    std::string text = kOu;
    text.replace(text.find("[[0.5]]"), 7, "[[0]]");
    const fs::path cfg = write_config("quiet.yaml", text);
    ASSERT_EQ(run("--config " + cfg.string() + " --out " + dir_.string() + " simulate").code, 0);
    const TrajectoryBundle bundle = read_trajectories(dir_ / "trajectories.bin");
    const CovarianceEstimate est = estimate_constant(bundle);
    // Deterministic decay x0 e^{-t} still has O(dt) quadratic variation.
    EXPECT_LT(est.constant_value()(0, 0), 1e-2);
}

TEST_F(CliTest, MalformedConfigExitsOneNamingTheKey) {
    std::string text = kOu;
    text.replace(text.find("dt: 0.01"), 8, "dt: soon");
    const fs::path cfg = write_config("bad.yaml", text);
    const RunResult r = run("--config " + cfg.string() + " --out " + dir_.string() + " simulate");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("simulate.dt"), std::string::npos) << r.output;
}

TEST_F(CliTest, UsageErrorsExitOne) {
    EXPECT_EQ(run("simulate").code, 1);
    EXPECT_EQ(run("--config " + (dir_ / "missing.yaml").string() + " simulate").code, 1);
    EXPECT_EQ(run("").code, 1);
}

TEST_F(CliTest, BlowUpExitsTwo) {
    std::string text = kOu;
    text.replace(text.find("\"-x1\""), 5, "\"x1^3\"");
    text.replace(text.find("lower: -1, upper: 1"), 19, "lower: 5, upper: 6");
    const fs::path cfg = write_config("blow.yaml", text);
    const RunResult r = run("--config " + cfg.string() + " --out " + dir_.string() + " simulate");
    EXPECT_EQ(r.code, 2) << r.output;
}

TEST_F(CliTest, EstimateKnownSigmaWritesDrift) {
    const fs::path cfg = write_config("ou.yaml", kOu);
    const std::string base = "--config " + cfg.string() + " --out " + dir_.string();
    ASSERT_EQ(run(base + " simulate").code, 0);
    const RunResult r = run(base + " estimate");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(dir_ / "drift.sdef"));
    EXPECT_FALSE(fs::exists(dir_ / "covariance.sdec"));
    const DriftEstimate drift = read_drift(dir_ / "drift.sdef");
    EXPECT_EQ(drift.basis_size(), 10u);
    EXPECT_NE(slurp(dir_ / "manifest.json").find("config_sha256"), std::string::npos);
}

TEST_F(CliTest, EstimateBothWritesCovarianceThenDrift) {
    std::string text = kOu;
    text += "estimate: {mode: both, covariance: estimate-first}\n";
    const fs::path cfg = write_config("both.yaml", text);
    const std::string base = "--config " + cfg.string() + " --out " + dir_.string();
    ASSERT_EQ(run(base + " simulate").code, 0);
    const RunResult r = run(base + " estimate");
    ASSERT_EQ(r.code, 0) << r.output;
    ASSERT_TRUE(fs::exists(dir_ / "covariance.sdec"));
    ASSERT_TRUE(fs::exists(dir_ / "drift.sdef"));
    const CovarianceEstimate cov = read_covariance(dir_ / "covariance.sdec");
    EXPECT_NEAR(cov.constant_value()(0, 0), 0.25, 0.02);
}

TEST_F(CliTest, EvaluateWithTrueDriftGivesZeroErrors) {
    const fs::path cfg = write_config("ou.yaml", kOu);
    const std::string base = "--config " + cfg.string() + " --out " + dir_.string();
    ASSERT_EQ(run(base + " simulate").code, 0);

    // -x lies in the spline span, so a least-squares fit on the domain is exact.
    const TrajectoryBundle bundle = read_trajectories(dir_ / "trajectories.bin");
    const auto basis = sdelearn::testing::fit_basis(bundle, BasisKind::BSpline, 2, 8);
    const Domain dom = basis->domain();
    const int P = 200;
    Eigen::MatrixXd psi(P, static_cast<Eigen::Index>(basis->size()));
    Eigen::VectorXd rhs(P);
    for (int p = 0; p < P; ++p) {
        const double x = dom.lower[0] + (dom.upper[0] - dom.lower[0]) * p / (P - 1);
        psi.row(p) = basis->eval(std::span<const double>(&x, 1)).transpose();
        rhs(p) = -x;
    }
    const Eigen::MatrixXd coeffs = psi.colPivHouseholderQr().solve(rhs);
    write_drift(dir_ / "truth.sdef", DriftEstimate(basis, coeffs));

    const RunResult r = run(base + " evaluate --drift " + (dir_ / "truth.sdef").string());
    ASSERT_EQ(r.code, 0) << r.output;
    const auto summary = read_summary(dir_ / "summary.csv");
    ASSERT_EQ(summary.size(), 9u);
    EXPECT_LE(summary.at("relative_l2_rho_error"), 1e-10);
    EXPECT_LE(summary.at("trajectory_error_mean"), 1e-10);
    EXPECT_LE(summary.at("trajectory_error_std"), 1e-10);
    for (const char* t : {"w2_t=0.25", "w2_t=0.5", "w2_t=1"}) EXPECT_LE(summary.at(t), 1e-10) << t;
    EXPECT_TRUE(fs::exists(dir_ / "summary.txt"));
    EXPECT_TRUE(fs::exists(dir_ / "drift_grid.csv"));
}

TEST_F(CliTest, EvaluateWithoutNoiseRecordAsksForResimulation) {
    std::string text = kOu;
    text.replace(text.find("seed: 3}"), 8, "seed: 3, record_noise: false}");
    const fs::path cfg = write_config("nonoise.yaml", text);
    const std::string base = "--config " + cfg.string() + " --out " + dir_.string();
    ASSERT_EQ(run(base + " simulate").code, 0);
    ASSERT_EQ(run(base + " estimate").code, 0);
    const RunResult r = run(base + " evaluate");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("record_noise"), std::string::npos) << r.output;
}

TEST_F(CliTest, PipelineSummaryIsDeterministicAcrossThreadCounts) {
    const fs::path cfg = write_config("ou.yaml", kOu);
    std::string summaries[2];
    for (int k = 0; k < 2; ++k) {
        const fs::path out = dir_ / std::to_string(k);
        const std::string base = "--config " + cfg.string() + " --out " + out.string() + " --threads " +
                                 std::to_string(k == 0 ? 1 : 3);
        ASSERT_EQ(run(base + " simulate").code, 0);
        ASSERT_EQ(run(base + " estimate").code, 0);
        ASSERT_EQ(run(base + " evaluate").code, 0);
        summaries[k] = slurp(out / "summary.csv");
    }
    EXPECT_EQ(summaries[0], summaries[1]);
}

TEST_F(CliTest, InteractingWritesKernelTable) {
    const fs::path cfg = write_config("agents.yaml", R"(
agents:
  N: 4
  agent_dim: 2
  phi: "r - 1"
  sigma: [[0.5, 0], [0, 0.5]]
  initial: {kind: uniform, lower: 0, upper: 5}
kernel_basis: {degree: 2, knots_per_dim: 4}
simulate: {T: 1, dt: 0.01, M: 50, seed: 1}
)");
    const RunResult r = run("--config " + cfg.string() + " --out " + dir_.string() + " interacting");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(dir_ / "kernel.csv"));
    const auto summary = read_summary(dir_ / "summary.csv");
    EXPECT_LT(summary.at("kernel_relative_l2_error"), 0.5);
}

TEST_F(CliTest, SpdeGrids) {
    RunResult r = run("--out " + dir_.string() + " spde --modes 1,5,20 --M 1,10 --seeds 2");
    ASSERT_EQ(r.code, 0) << r.output;
    const std::string grid = slurp(dir_ / "spde_constant.csv");
    EXPECT_EQ(grid.substr(0, grid.find('\n')), "M,N=1,N=5,N=20");
    EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 3);

    r = run("--out " + dir_.string() + " spde --modes 20 --M 1 --theta1 2 --theta2 4");
    ASSERT_EQ(r.code, 0) << r.output;
    const std::string pw = slurp(dir_ / "spde_piecewise.csv");
    EXPECT_NE(pw.find("theta1_hat"), std::string::npos);

    EXPECT_EQ(run("--out " + dir_.string() + " spde --theta1 2").code, 1);
    EXPECT_EQ(run("--out " + dir_.string() + " spde --theta 2 --theta1 1 --theta2 3").code, 1);
}
