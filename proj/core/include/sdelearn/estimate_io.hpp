#pragma once

#include "sdelearn/covariance_estimator.hpp"
#include "sdelearn/drift_estimator.hpp"

#include <filesystem>
#include <iosfwd>

namespace sdelearn {

/**
 * Drift estimate file, little-endian:
 *
 *     char[4] "SDEF", u32 version (1), u32 d, u32 n
 *     basis: u32 kind (0 B-spline, 1 piecewise polynomial), u32 degree,
 *            u32[d] knots per coordinate, f64[d] lower, f64[d] upper
 *     u32 regularized
 *     f64[n][d] coefficients, row i = a_i
 */
void write_drift(std::ostream& out, const DriftEstimate& estimate);
void write_drift(const std::filesystem::path& path, const DriftEstimate& estimate);
DriftEstimate read_drift(std::istream& in);
DriftEstimate read_drift(const std::filesystem::path& path);

/**
 * Covariance estimate file:
 *
 *     char[4] "SDEC", u32 version (1), u32 d, u32 form (0 constant, 1 state-dependent)
 *     constant:        f64[d][d]
 *     state-dependent: u32 n, basis block as above, u32 regularized,
 *                      f64[n][d(d+1)/2] packed upper-triangle coefficients
 */
void write_covariance(std::ostream& out, const CovarianceEstimate& estimate);
void write_covariance(const std::filesystem::path& path, const CovarianceEstimate& estimate);
CovarianceEstimate read_covariance(std::istream& in);
CovarianceEstimate read_covariance(const std::filesystem::path& path);

}  // namespace sdelearn
