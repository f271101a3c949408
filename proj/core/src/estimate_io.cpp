#include "sdelearn/estimate_io.hpp"

#include "sdelearn/binary_io.hpp"
#include "sdelearn/error.hpp"

#include <fstream>

namespace sdelearn {

namespace {

constexpr std::uint32_t kVersion = 1;

void write_basis(std::ostream& out, const BasisSpec& spec) {
    binary::write_u32(out, static_cast<std::uint32_t>(spec.kind));
    binary::write_u32(out, static_cast<std::uint32_t>(spec.degree));
    for (int k : spec.knots_per_dim) binary::write_u32(out, static_cast<std::uint32_t>(k));
    binary::write_f64s(out, spec.domain.lower);
    binary::write_f64s(out, spec.domain.upper);
}

BasisSpec read_basis(std::istream& in, std::size_t d) {
    BasisSpec spec;
    const auto kind = binary::read_u32(in, "basis kind");
    if (kind > 1) throw FormatError("unknown basis kind " + std::to_string(kind));
    spec.kind = static_cast<BasisKind>(kind);
    spec.degree = static_cast<int>(binary::read_u32(in, "basis degree"));
    for (std::size_t k = 0; k < d; ++k) spec.knots_per_dim.push_back(static_cast<int>(binary::read_u32(in, "knots")));
    spec.domain.lower = binary::read_f64s(in, d, "domain lower");
    spec.domain.upper = binary::read_f64s(in, d, "domain upper");
    try {
        spec.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("invalid basis in estimate file: ") + e.what());
    }
    return spec;
}

/// Row-major copy of an n×c matrix.
std::vector<double> rows_of(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data(), m.rows(), m.cols()) = m;
    return out;
}

Eigen::MatrixXd matrix_of(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), rows, cols);
}

template <class Fn>
void with_output(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    fn(out);
    if (!out) throw FormatError("failed writing " + path.string());
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open estimate file " + path.string());
    return in;
}

}  // namespace

void write_drift(std::ostream& out, const DriftEstimate& estimate) {
    binary::write_magic(out, "SDEF");
    binary::write_u32(out, kVersion);
    binary::write_u32(out, static_cast<std::uint32_t>(estimate.dim()));
    binary::write_u32(out, static_cast<std::uint32_t>(estimate.basis_size()));
    write_basis(out, estimate.basis().spec());
    binary::write_u32(out, estimate.regularized() ? 1u : 0u);
    binary::write_f64s(out, rows_of(estimate.coeffs()));
}

void write_drift(const std::filesystem::path& path, const DriftEstimate& estimate) {
    with_output(path, [&](std::ostream& out) { write_drift(out, estimate); });
}

DriftEstimate read_drift(std::istream& in) {
    binary::expect_magic(in, "SDEF");
    const auto version = binary::read_u32(in, "version");
    if (version != kVersion) throw FormatError("unsupported drift file version " + std::to_string(version));
    const std::size_t d = binary::read_u32(in, "d");
    const std::size_t n = binary::read_u32(in, "n");
    if (d == 0 || n == 0) throw FormatError("invalid drift header");
    const BasisSpec spec = read_basis(in, d);
    if (spec.size() != n) throw FormatError("basis size does not match n in drift file");
    const bool regularized = binary::read_u32(in, "regularized") != 0;
    const auto coeffs = binary::read_f64s(in, n * d, "coefficients");
    return DriftEstimate(std::make_shared<const BasisSet>(make_basis(spec)),
                         matrix_of(coeffs, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)), regularized);
}

DriftEstimate read_drift(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_drift(in);
}

void write_covariance(std::ostream& out, const CovarianceEstimate& estimate) {
    binary::write_magic(out, "SDEC");
    binary::write_u32(out, kVersion);
    binary::write_u32(out, static_cast<std::uint32_t>(estimate.dim()));
    if (estimate.form() == CovarianceEstimate::Form::Constant) {
        binary::write_u32(out, 0u);
        binary::write_f64s(out, rows_of(estimate.constant_value()));
        return;
    }
    binary::write_u32(out, 1u);
    binary::write_u32(out, static_cast<std::uint32_t>(estimate.basis()->size()));
    write_basis(out, estimate.basis()->spec());
    binary::write_u32(out, estimate.regularized() ? 1u : 0u);
    binary::write_f64s(out, rows_of(estimate.coeffs()));
}

void write_covariance(const std::filesystem::path& path, const CovarianceEstimate& estimate) {
    with_output(path, [&](std::ostream& out) { write_covariance(out, estimate); });
}

CovarianceEstimate read_covariance(std::istream& in) {
    binary::expect_magic(in, "SDEC");
    const auto version = binary::read_u32(in, "version");
    if (version != kVersion) throw FormatError("unsupported covariance file version " + std::to_string(version));
    const std::size_t d = binary::read_u32(in, "d");
    const auto form = binary::read_u32(in, "form");
    if (d == 0) throw FormatError("invalid covariance header");
    const auto D = static_cast<Eigen::Index>(d);
    if (form == 0) {
        return CovarianceEstimate::constant(matrix_of(binary::read_f64s(in, d * d, "covariance"), D, D));
    }
    if (form != 1) throw FormatError("unknown covariance form " + std::to_string(form));
    const std::size_t n = binary::read_u32(in, "n");
    const BasisSpec spec = read_basis(in, d);
    if (spec.size() != n) throw FormatError("basis size does not match n in covariance file");
    const bool regularized = binary::read_u32(in, "regularized") != 0;
    const std::size_t P = packed_size(d);
    const auto coeffs = binary::read_f64s(in, n * P, "coefficients");
    return CovarianceEstimate::state_dependent(std::make_shared<const BasisSet>(make_basis(spec)),
                                               matrix_of(coeffs, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(P)),
                                               regularized);
}

CovarianceEstimate read_covariance(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_covariance(in);
}

}  // namespace sdelearn
