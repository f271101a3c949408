#include "sdelearn/basis.hpp"

#include "sdelearn/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace sdelearn {

void Domain::validate() const {
    if (lower.empty() || lower.size() != upper.size()) throw ConfigError("domain bounds must be non-empty and matching");
    for (std::size_t k = 0; k < lower.size(); ++k) {
        if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]) || !(lower[k] < upper[k])) {
            throw ConfigError("domain needs lower < upper in coordinate " + std::to_string(k + 1));
        }
    }
}

void BasisSpec::validate() const {
    domain.validate();
    if (degree < 0) throw ConfigError("basis degree must be >= 0");
    if (knots_per_dim.size() != domain.dim()) {
        throw ConfigError("knots_per_dim has " + std::to_string(knots_per_dim.size()) + " entries for a " +
                          std::to_string(domain.dim()) + "-dimensional domain");
    }
    for (int k : knots_per_dim) {
        if (k < 1) throw ConfigError("knots_per_dim entries must be >= 1");
    }
}

std::size_t BasisSpec::size_along(std::size_t k) const {
    const auto knots = static_cast<std::size_t>(knots_per_dim.at(k));
    const auto p = static_cast<std::size_t>(degree);
    return kind == BasisKind::BSpline ? knots + p : knots * (p + 1);
}

std::size_t BasisSpec::size() const {
    std::size_t n = 1;
    for (std::size_t k = 0; k < dim(); ++k) n *= size_along(k);
    return n;
}

Basis1d::Basis1d(BasisKind kind, int degree, int knots, double lower, double upper)
    : kind_(kind), degree_(degree), knots_(knots), lower_(lower), upper_(upper) {
    if (degree < 0) throw ConfigError("basis degree must be >= 0");
    if (knots < 1) throw ConfigError("basis needs at least one subdivision");
    if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
        throw ConfigError("basis interval needs lower < upper");
    }
    const auto p = static_cast<std::size_t>(degree);
    const auto K = static_cast<std::size_t>(knots);
    const double h = (upper - lower) / static_cast<double>(K);
    if (kind == BasisKind::BSpline) {
        size_ = K + p;
        knot_vector_.assign(K + 2 * p + 1, lower);
        for (std::size_t i = 1; i < K; ++i) knot_vector_[p + i] = lower + static_cast<double>(i) * h;
        std::fill(knot_vector_.begin() + static_cast<std::ptrdiff_t>(p + K), knot_vector_.end(), upper);
    } else {
        size_ = K * (p + 1);
        knot_vector_.resize(K + 1);
        for (std::size_t i = 0; i < K; ++i) knot_vector_[i] = lower + static_cast<double>(i) * h;
        knot_vector_[K] = upper;
    }
}

std::size_t Basis1d::cell_of(double x) const noexcept {
    // Boundaries of cell c are b[c], b[c+1] with b = interior part of the knot vector.
    const std::size_t offset = kind_ == BasisKind::BSpline ? static_cast<std::size_t>(degree_) : 0;
    const auto K = static_cast<std::size_t>(knots_);
    const double* b = knot_vector_.data() + offset;
    const double h = (upper_ - lower_) / static_cast<double>(K);
    auto c = static_cast<std::ptrdiff_t>(std::floor((x - lower_) / h));
    c = std::clamp<std::ptrdiff_t>(c, 0, static_cast<std::ptrdiff_t>(K) - 1);
    while (c > 0 && x < b[c]) --c;
    while (c + 1 < static_cast<std::ptrdiff_t>(K) && x >= b[c + 1]) ++c;
    return static_cast<std::size_t>(c);
}

void Basis1d::eval(double x, std::span<double> out) const {
    x = std::clamp(x, lower_, upper_);
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t cell = cell_of(x);
    const auto p = static_cast<std::size_t>(degree_);

    if (kind_ == BasisKind::PiecewisePolynomial) {
        const double a = knot_vector_[cell];
        const double b = knot_vector_[cell + 1];
        const double t = 2.0 * (x - a) / (b - a) - 1.0;
        double* v = out.data() + cell * (p + 1);
        v[0] = 1.0;
        if (p >= 1) v[1] = t;
        for (std::size_t q = 1; q < p; ++q) {
            v[q + 1] = (static_cast<double>(2 * q + 1) * t * v[q] - static_cast<double>(q) * v[q - 1]) /
                       static_cast<double>(q + 1);
        }
        return;
    }

    // Non-zero clamped B-splines N_{span-p..span} by the triangular Cox–de Boor scheme.
    const std::size_t span = cell + p;
    const auto& U = knot_vector_;
    constexpr std::size_t kInline = 32;
    std::array<double, kInline> left_buf{}, right_buf{}, n_buf{};
    std::vector<double> heap;
    double* left = left_buf.data();
    double* right = right_buf.data();
    double* N = n_buf.data();
    if (p + 1 > kInline) {
        heap.assign(3 * (p + 1), 0.0);
        left = heap.data();
        right = left + p + 1;
        N = right + p + 1;
    }
    N[0] = 1.0;
    for (std::size_t j = 1; j <= p; ++j) {
        left[j] = x - U[span + 1 - j];
        right[j] = U[span + j] - x;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            const double temp = N[r] / (right[r + 1] + left[j - r]);
            N[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        N[j] = saved;
    }
    for (std::size_t r = 0; r <= p; ++r) out[span - p + r] = N[r];
}

BasisSet::BasisSet(std::vector<Basis1d> factors, std::size_t cap) : factors_(std::move(factors)) {
    if (factors_.empty()) throw ConfigError("basis needs at least one coordinate");
    size_ = 1;
    max_factor_size_ = 0;
    for (const auto& f : factors_) {
        if (size_ > cap / f.size()) {
            throw ConfigError("basis size exceeds cap of " + std::to_string(cap) + " functions");
        }
        size_ *= f.size();
        max_factor_size_ = std::max(max_factor_size_, f.size());
    }
    if (size_ > cap) throw ConfigError("basis size exceeds cap of " + std::to_string(cap) + " functions");
}

BasisSpec BasisSet::spec() const {
    BasisSpec spec;
    spec.kind = factors_.front().kind();
    spec.degree = factors_.front().degree();
    for (const auto& f : factors_) {
        spec.knots_per_dim.push_back(f.knots());
        spec.domain.lower.push_back(f.lower());
        spec.domain.upper.push_back(f.upper());
    }
    return spec;
}

Domain BasisSet::domain() const { return spec().domain; }

void BasisSet::eval(std::span<const double> x, std::span<double> out) const {
    if (factors_.size() == 1) {
        factors_.front().eval(x[0], out.first(size_));
        return;
    }
    constexpr std::size_t kInline = 256;
    std::array<double, kInline> buf;
    std::vector<double> heap;
    double* values = buf.data();
    if (max_factor_size_ > kInline) {
        heap.resize(max_factor_size_);
        values = heap.data();
    }
    // Expand the product in place, last coordinate fastest.
    std::size_t len = 1;
    out[0] = 1.0;
    for (std::size_t k = 0; k < factors_.size(); ++k) {
        const auto& f = factors_[k];
        const std::size_t nk = f.size();
        f.eval(x[k], std::span<double>(values, nk));
        for (std::size_t j = len; j-- > 0;) {
            const double head = out[j];
            for (std::size_t i = nk; i-- > 0;) out[j * nk + i] = head * values[i];
        }
        len *= nk;
    }
}

Eigen::VectorXd BasisSet::eval(std::span<const double> x) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(size_));
    eval(x, std::span<double>(out.data(), size_));
    return out;
}

Domain build_domain(const TrajectoryBundle& bundle, double pad_fraction) {
    if (!(pad_fraction >= 0.0)) throw ConfigError("pad_fraction must be >= 0");
    const std::size_t d = bundle.dim();
    Domain dom;
    dom.lower.assign(d, std::numeric_limits<double>::infinity());
    dom.upper.assign(d, -std::numeric_limits<double>::infinity());
    const auto& s = bundle.raw_states();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::size_t k = i % d;
        dom.lower[k] = std::min(dom.lower[k], s[i]);
        dom.upper[k] = std::max(dom.upper[k], s[i]);
    }
    for (std::size_t k = 0; k < d; ++k) {
        const double range = dom.upper[k] - dom.lower[k];
        if (range == 0.0) {
            dom.lower[k] -= 0.5;
            dom.upper[k] += 0.5;
        } else {
            dom.lower[k] -= pad_fraction * range;
            dom.upper[k] += pad_fraction * range;
        }
    }
    return dom;
}

BasisSet tensor_product(const std::vector<BasisSpec>& specs_1d, std::size_t cap) {
    if (specs_1d.empty()) throw ConfigError("tensor product of zero bases");
    std::vector<Basis1d> factors;
    factors.reserve(specs_1d.size());
    for (const auto& s : specs_1d) {
        s.validate();
        if (s.dim() != 1) throw ConfigError("tensor_product expects one-dimensional specs");
        factors.emplace_back(s.kind, s.degree, s.knots_per_dim[0], s.domain.lower[0], s.domain.upper[0]);
    }
    return BasisSet(std::move(factors), cap);
}

BasisSet make_basis(const BasisSpec& spec, std::size_t cap) {
    spec.validate();
    std::vector<BasisSpec> parts;
    for (std::size_t k = 0; k < spec.dim(); ++k) {
        parts.push_back(BasisSpec{spec.kind, spec.degree, {spec.knots_per_dim[k]},
                                  Domain{{spec.domain.lower[k]}, {spec.domain.upper[k]}}});
    }
    return tensor_product(parts, cap);
}

}  // namespace sdelearn
