#pragma once

// Small builders shared by the unit and acceptance tests.

#include "sdelearn/basis.hpp"
#include "sdelearn/drift_estimator.hpp"
#include "sdelearn/model.hpp"
#include "sdelearn/simulate.hpp"

#include <memory>
#include <string>
#include <vector>

namespace sdelearn::testing {

inline std::vector<ScalarExpr> exprs(const std::vector<std::string>& sources, std::size_t dim) {
    std::vector<ScalarExpr> out;
    for (const auto& s : sources) out.push_back(parse_expr(s, dim));
    return out;
}

inline SdeModel make_model(const std::vector<std::string>& drift, const std::vector<std::string>& sigma,
                           InitialDistribution initial) {
    const std::size_t d = drift.size();
    return SdeModel(exprs(drift, d), exprs(sigma, d), std::move(initial));
}

inline InitialDistribution uniform_box(std::size_t d, double lo, double hi) {
    return InitialDistribution::uniform(std::vector<double>(d, lo), std::vector<double>(d, hi));
}

inline std::shared_ptr<const BasisSet> fit_basis(const TrajectoryBundle& bundle, BasisKind kind, int degree, int knots,
                                                 double pad = 0.0) {
    BasisSpec spec;
    spec.kind = kind;
    spec.degree = degree;
    spec.knots_per_dim.assign(bundle.dim(), knots);
    spec.domain = build_domain(bundle, pad);
    return std::make_shared<const BasisSet>(make_basis(spec));
}

inline SimConfig sim(double T, double dt, std::size_t M, std::uint64_t seed, bool noise = true) {
    SimConfig cfg;
    cfg.T = T;
    cfg.dt = dt;
    cfg.M = M;
    cfg.seed = seed;
    cfg.record_noise = noise;
    return cfg;
}

}  // namespace sdelearn::testing
