#pragma once

#include "sdelearn/basis.hpp"
#include "sdelearn/drift_estimator.hpp"
#include "sdelearn/interacting.hpp"
#include "sdelearn/model.hpp"
#include "sdelearn/simulate.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sdelearn::cli {

struct BasisSection {
    BasisKind kind = BasisKind::BSpline;
    int degree = 2;
    /// One entry, or one per coordinate.
    std::vector<int> knots_per_dim{8};
    double pad_fraction = 0.0;

    /// Spec on the padded data range of `bundle`.
    BasisSpec spec_for(const TrajectoryBundle& bundle) const;
};

struct EstimateSection {
    enum class Mode { Drift, Covariance, Both };
    enum class Covariance { Known, EstimateFirst };
    enum class Form { Constant, StateDependent };

    Mode mode = Mode::Drift;
    Covariance covariance = Covariance::Known;
    Form covariance_form = Form::Constant;
    SolverPath solver = SolverPath::Auto;
};

struct EvaluateSection {
    std::vector<double> times{0.25, 0.5, 1.0};
    std::size_t w2_cap = 1000;
};

struct OutputSection {
    std::filesystem::path directory = "out";
    bool binary = true;
    bool csv = false;
};

struct AgentSection {
    AgentSystem system;
    std::string phi_source;
    BasisSection kernel_basis;
};

/// Parsed experiment file. Sections are optional here; each command checks
/// for the ones it needs.
struct ExperimentConfig {
    std::string source_text;
    std::filesystem::path source_path;

    std::optional<SdeModel> model;
    std::optional<SimConfig> simulate;
    std::optional<BasisSection> basis;
    std::optional<BasisSection> covariance_basis;
    EstimateSection estimate;
    EvaluateSection evaluate;
    OutputSection output;
    std::optional<AgentSection> agents;

    const SdeModel& require_model() const;
    const SimConfig& require_simulate() const;
    const BasisSection& require_basis() const;
    const AgentSection& require_agents() const;
};

/// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& origin = {});
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace sdelearn::cli
