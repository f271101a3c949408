#pragma once

#include "sdelearn/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace sdelearn {

/// Axis-aligned box; lower < upper in every coordinate.
struct Domain {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dim() const noexcept { return lower.size(); }
    void validate() const;
    bool operator==(const Domain&) const = default;
};

enum class BasisKind : std::uint32_t { BSpline = 0, PiecewisePolynomial = 1 };

/**
 * Declarative hypothesis space: per-coordinate uniform subdivisions of the
 * domain carrying either clamped B-splines (knots + degree functions per
 * coordinate) or piecewise shifted-Legendre polynomials
 * (knots * (degree + 1) functions per coordinate), combined by tensor product.
 */
struct BasisSpec {
    BasisKind kind = BasisKind::BSpline;
    int degree = 2;
    std::vector<int> knots_per_dim;
    Domain domain;

    std::size_t dim() const noexcept { return domain.dim(); }
    void validate() const;
    std::size_t size_along(std::size_t k) const;
    std::size_t size() const;
    bool operator==(const BasisSpec&) const = default;
};

/// One-dimensional factor of a tensor basis.
class Basis1d {
public:
    Basis1d(BasisKind kind, int degree, int knots, double lower, double upper);

    std::size_t size() const noexcept { return size_; }
    /// Writes all values at x (clamped into [lower, upper]) into `out`.
    void eval(double x, std::span<double> out) const;

    BasisKind kind() const noexcept { return kind_; }
    int degree() const noexcept { return degree_; }
    int knots() const noexcept { return knots_; }
    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }
    /// Full clamped knot vector (B-spline kind) or cell boundaries.
    const std::vector<double>& knot_vector() const noexcept { return knot_vector_; }

private:
    std::size_t cell_of(double x) const noexcept;

    BasisKind kind_;
    int degree_;
    int knots_;
    double lower_;
    double upper_;
    std::size_t size_;
    std::vector<double> knot_vector_;
};

/**
 * Evaluable tensor-product basis. Flattening is row-major over the
 * per-coordinate indices (i_1, ..., i_d): the last coordinate varies fastest,
 * flat = ((i_1 * n_2 + i_2) * n_3 + i_3) ...
 */
class BasisSet {
public:
    explicit BasisSet(std::vector<Basis1d> factors, std::size_t cap = 1'000'000);

    std::size_t size() const noexcept { return size_; }
    std::size_t dim() const noexcept { return factors_.size(); }
    const std::vector<Basis1d>& factors() const noexcept { return factors_; }
    BasisSpec spec() const;
    Domain domain() const;

    /// All n values at x; coordinates outside the domain are clamped onto it.
    void eval(std::span<const double> x, std::span<double> out) const;
    Eigen::VectorXd eval(std::span<const double> x) const;

private:
    std::vector<Basis1d> factors_;
    std::size_t size_;
    std::size_t max_factor_size_;
};

/// Per-coordinate [min - pad*range, max + pad*range] over all states;
/// a zero range widens to [v - 0.5, v + 0.5].
Domain build_domain(const TrajectoryBundle& bundle, double pad_fraction);

/// Tensor product of one-dimensional specs (each with a 1d domain).
BasisSet tensor_product(const std::vector<BasisSpec>& specs_1d, std::size_t cap = 1'000'000);

/// Realises a d-dimensional spec.
BasisSet make_basis(const BasisSpec& spec, std::size_t cap = 1'000'000);

}  // namespace sdelearn
