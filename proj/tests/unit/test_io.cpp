#include "fixtures.hpp"

#include "sdelearn/binary_io.hpp"
#include "sdelearn/covariance_estimator.hpp"
#include "sdelearn/error.hpp"
#include "sdelearn/estimate_io.hpp"
#include "sdelearn/trajectory_io.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

using namespace sdelearn;
using sdelearn::testing::fit_basis;
using sdelearn::testing::make_model;
using sdelearn::testing::sim;
using sdelearn::testing::uniform_box;

namespace {

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TrajectoryBundle sample(bool noise) {
    const SdeModel m = make_model({"-x1 + 0.3*x2", "sin(x1)"}, {"0.5", "0.1", "0.1", "0.4"}, uniform_box(2, -1, 1));
    return euler_maruyama(m, sim(0.2, 0.01, 4, 3, noise));
}

std::string serialise(const TrajectoryBundle& b) {
    std::ostringstream out(std::ios::binary);
    write_trajectories(out, b);
    return out.str();
}

TrajectoryBundle parse(const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    return read_trajectories(in);
}

}  // namespace

TEST(TrajectoryIo, RoundTripWithAndWithoutNoise) {
    for (bool noise : {true, false}) {
        const TrajectoryBundle b = sample(noise);
        const TrajectoryBundle r = parse(serialise(b));
        EXPECT_EQ(r.dim(), b.dim());
        EXPECT_EQ(r.count(), b.count());
        EXPECT_EQ(r.grid(), b.grid());
        EXPECT_TRUE(bit_equal(r.raw_states(), b.raw_states()));
        ASSERT_EQ(r.has_noise(), noise);
        if (noise) EXPECT_TRUE(bit_equal(*r.raw_noise(), *b.raw_noise()));
    }
}

TEST(TrajectoryIo, HeaderLayout) {
    const TrajectoryBundle b = sample(true);
    const std::string bytes = serialise(b);
    EXPECT_EQ(bytes.substr(0, 4), "SDET");
    std::uint32_t header[5];
    std::memcpy(header, bytes.data() + 4, sizeof header);
    EXPECT_EQ(header[0], 1u);
    EXPECT_EQ(header[1], 2u);
    EXPECT_EQ(header[2], b.steps());
    EXPECT_EQ(header[3], 4u);
    EXPECT_EQ(header[4], 1u);
    const std::size_t L = b.steps();
    EXPECT_EQ(bytes.size(), 24 + 8 * (L + 4 * L * 2 + 4 * (L - 1) * 2));
}

TEST(TrajectoryIo, RejectsCorruptInput) {
    const std::string bytes = serialise(sample(true));
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(parse(bad), FormatError);
    EXPECT_THROW(parse(bytes.substr(0, bytes.size() - 3)), FormatError);
    EXPECT_THROW(parse(bytes.substr(0, 10)), FormatError);
    std::string version = bytes;
    version[4] = 9;
    EXPECT_THROW(parse(version), FormatError);
    std::string flags = bytes;
    flags[20] = 6;
    EXPECT_THROW(parse(flags), FormatError);
    EXPECT_THROW(read_trajectories(std::filesystem::path("/nonexistent/file.bin")), ConfigError);
}

TEST(TrajectoryIo, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "sdelearn_io_test.bin";
    const TrajectoryBundle b = sample(true);
    write_trajectories(path, b);
    EXPECT_TRUE(bit_equal(read_trajectories(path).raw_states(), b.raw_states()));
    std::filesystem::remove(path);
}

TEST(TrajectoryIo, CsvHeaderAndRows) {
    const TrajectoryBundle b(TimeGrid({0.0, 0.5}), 2, 1, {1.0, 2.0, 3.5, -4.0});
    std::ostringstream out;
    write_trajectories_csv(out, b);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "m,t,x1,x2");
    std::getline(in, line);
    EXPECT_EQ(line, "0,0,1,2");
    std::getline(in, line);
    EXPECT_EQ(line, "0,0.5,3.5,-4");
    EXPECT_FALSE(std::getline(in, line));
}

TEST(DriftIo, RoundTrip) {
    const TrajectoryBundle b = sample(false);
    for (BasisKind kind : {BasisKind::BSpline, BasisKind::PiecewisePolynomial}) {
        const auto basis = fit_basis(b, kind, 2, 3, 0.1);
        const DriftEstimate est =
            solve(assemble(b, *basis, CovModel::constant(Eigen::MatrixXd::Identity(2, 2))), basis);
        std::ostringstream out(std::ios::binary);
        write_drift(out, est);
        EXPECT_EQ(out.str().substr(0, 4), "SDEF");
        std::istringstream in(out.str(), std::ios::binary);
        const DriftEstimate r = read_drift(in);
        EXPECT_EQ(r.basis().spec(), basis->spec());
        EXPECT_EQ(r.coeffs(), est.coeffs());
        EXPECT_EQ(r.regularized(), est.regularized());
        const std::vector<double> x = {0.1, -0.2};
        EXPECT_EQ(r.eval(x), est.eval(x));

        std::string cut = out.str();
        cut.resize(cut.size() - 8);
        std::istringstream short_in(cut, std::ios::binary);
        EXPECT_THROW(read_drift(short_in), FormatError);
    }
}

TEST(CovarianceIo, RoundTripBothForms) {
    Eigen::MatrixXd s(2, 2);
    s << 0.4, 0.28, 0.28, 0.68;
    const CovarianceEstimate c = CovarianceEstimate::constant(s);
    std::ostringstream out(std::ios::binary);
    write_covariance(out, c);
    EXPECT_EQ(out.str().substr(0, 4), "SDEC");
    std::istringstream in(out.str(), std::ios::binary);
    const CovarianceEstimate rc = read_covariance(in);
    EXPECT_EQ(rc.form(), CovarianceEstimate::Form::Constant);
    EXPECT_EQ(rc.constant_value(), c.constant_value());

    const TrajectoryBundle b = sample(false);
    const CovarianceEstimate sd = estimate_state_dependent(b, fit_basis(b, BasisKind::BSpline, 1, 2));
    std::ostringstream out2(std::ios::binary);
    write_covariance(out2, sd);
    std::istringstream in2(out2.str(), std::ios::binary);
    const CovarianceEstimate rsd = read_covariance(in2);
    EXPECT_EQ(rsd.form(), CovarianceEstimate::Form::StateDependent);
    EXPECT_EQ(rsd.coeffs(), sd.coeffs());
    const std::vector<double> x = {0.3, 0.1};
    EXPECT_EQ(rsd.raw(x), sd.raw(x));

    std::string bad = out2.str();
    bad[3] = 'F';
    std::istringstream in3(bad, std::ios::binary);
    EXPECT_THROW(read_covariance(in3), FormatError);
}
