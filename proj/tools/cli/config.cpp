#include "config.hpp"

#include "sdelearn/error.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace sdelearn::cli {

namespace {

/// A YAML mapping plus its dotted path, for error messages.
class Section {
public:
    Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (!node_.IsMap()) throw ConfigError("config section '" + path_ + "' must be a mapping");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return node_[key].IsDefined() && !node_[key].IsNull(); }

    YAML::Node raw(const std::string& key) const {
        if (!has(key)) throw ConfigError("missing config key '" + key_path(key) + "'");
        return node_[key];
    }

    Section child(const std::string& key) const { return Section(raw(key), key_path(key)); }

    template <class T>
    T get(const std::string& key) const {
        return convert<T>(raw(key), key_path(key));
    }

    template <class T>
    T get_or(const std::string& key, T fallback) const {
        return has(key) ? get<T>(key) : fallback;
    }

    /// Rejects keys outside `allowed`.
    void only(std::initializer_list<const char*> allowed) const {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!ok.count(key)) throw ConfigError("unknown config key '" + key_path(key) + "'");
        }
    }

    template <class T>
    static T convert(const YAML::Node& node, const std::string& path) {
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError("config key '" + path + "' has the wrong type");
        }
    }

private:
    YAML::Node node_;
    std::string path_;
};

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

template <class T>
std::vector<T> list_of(const Section& s, const std::string& key) {
    const YAML::Node node = s.raw(key);
    if (node.IsScalar()) return {Section::convert<T>(node, s.key_path(key))};
    if (!node.IsSequence()) throw ConfigError("config key '" + s.key_path(key) + "' must be a list");
    std::vector<T> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
        out.push_back(Section::convert<T>(node[i], s.key_path(key) + "[" + std::to_string(i) + "]"));
    }
    return out;
}

/// Wraps expression errors with the key they came from.
ScalarExpr expr_at(const std::string& source, const std::vector<std::string>& variables, const std::string& path) {
    try {
        return parse_expr(source, variables);
    } catch (const ConfigError& e) {
        throw ConfigError("config key '" + path + "': " + e.what());
    }
}

InitialDistribution parse_initial(const Section& s, std::size_t dim) {
    s.only({"kind", "lower", "upper", "points"});
    const std::string kind = lower(s.get_or<std::string>("kind", "uniform"));
    if (kind == "uniform") {
        auto lo = list_of<double>(s, "lower");
        auto hi = list_of<double>(s, "upper");
        if (lo.size() == 1 && dim > 1) lo.assign(dim, lo[0]);
        if (hi.size() == 1 && dim > 1) hi.assign(dim, hi[0]);
        if (lo.size() != dim || hi.size() != dim) {
            throw ConfigError("config key '" + s.key_path("lower") + "'/'upper' needs " + std::to_string(dim) + " values");
        }
        try {
            return InitialDistribution::uniform(lo, hi);
        } catch (const ConfigError& e) {
            throw ConfigError("config key '" + s.key_path("lower") + "': " + e.what());
        }
    }
    if (kind == "points") {
        const YAML::Node pts = s.raw("points");
        if (!pts.IsSequence() || pts.size() == 0) throw ConfigError("config key '" + s.key_path("points") + "' must be a non-empty list");
        std::vector<std::vector<double>> points;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const std::string path = s.key_path("points") + "[" + std::to_string(i) + "]";
            auto p = Section::convert<std::vector<double>>(pts[i], path);
            if (p.size() != dim) throw ConfigError("config key '" + path + "' needs " + std::to_string(dim) + " values");
            points.push_back(std::move(p));
        }
        return InitialDistribution::points(std::move(points));
    }
    throw ConfigError("config key '" + s.key_path("kind") + "' must be uniform or points");
}

/// d×d matrix given as nested lists (entries may be numbers or expressions).
std::vector<std::string> matrix_sources(const Section& s, const std::string& key, std::size_t dim) {
    const YAML::Node node = s.raw(key);
    const std::string path = s.key_path(key);
    std::vector<std::string> out;
    if (dim == 1 && node.IsScalar()) return {node.as<std::string>()};
    if (!node.IsSequence() || node.size() != dim) throw ConfigError("config key '" + path + "' must be a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
    for (std::size_t r = 0; r < dim; ++r) {
        const std::string row_path = path + "[" + std::to_string(r) + "]";
        if (!node[r].IsSequence() || node[r].size() != dim) {
            throw ConfigError("config key '" + row_path + "' must have " + std::to_string(dim) + " entries");
        }
        for (std::size_t c = 0; c < dim; ++c) out.push_back(Section::convert<std::string>(node[r][c], row_path));
    }
    return out;
}

SdeModel parse_model(const Section& s) {
    s.only({"dim", "drift", "sigma", "initial"});
    const auto dim = s.get<std::size_t>("dim");
    if (dim == 0) throw ConfigError("config key '" + s.key_path("dim") + "' must be >= 1");
    const auto names = coordinate_names(dim);
    const auto drift_src = list_of<std::string>(s, "drift");
    if (drift_src.size() != dim) {
        throw ConfigError("config key '" + s.key_path("drift") + "' needs " + std::to_string(dim) + " expressions");
    }
    std::vector<ScalarExpr> drift;
    for (std::size_t k = 0; k < dim; ++k) {
        drift.push_back(expr_at(drift_src[k], names, s.key_path("drift") + "[" + std::to_string(k) + "]"));
    }
    std::vector<ScalarExpr> sigma;
    const auto sigma_src = matrix_sources(s, "sigma", dim);
    for (std::size_t i = 0; i < sigma_src.size(); ++i) sigma.push_back(expr_at(sigma_src[i], names, s.key_path("sigma")));
    InitialDistribution initial = parse_initial(s.child("initial"), dim);
    try {
        return SdeModel(std::move(drift), std::move(sigma), std::move(initial));
    } catch (const ConfigError& e) {
        throw ConfigError("config section '" + s.key_path("") + "': " + e.what());
    }
}

SimConfig parse_simulate(const Section& s) {
    s.only({"T", "dt", "M", "seed", "record_noise"});
    SimConfig cfg;
    cfg.T = s.get<double>("T");
    cfg.dt = s.get<double>("dt");
    const auto M = s.get<long long>("M");
    if (M < 1) throw ConfigError("config key '" + s.key_path("M") + "' must be >= 1");
    cfg.M = static_cast<std::size_t>(M);
    cfg.seed = s.get_or<std::uint64_t>("seed", 0);
    cfg.record_noise = s.get_or<bool>("record_noise", true);
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("config section 'simulate': " + std::string(e.what()));
    }
    return cfg;
}

BasisSection parse_basis(const Section& s) {
    s.only({"kind", "degree", "knots_per_dim", "knots", "pad_fraction"});
    BasisSection b;
    const std::string kind = lower(s.get_or<std::string>("kind", "bspline"));
    if (kind == "bspline" || kind == "b-spline") {
        b.kind = BasisKind::BSpline;
    } else if (kind == "piecewise_polynomial" || kind == "pw-polynomial" || kind == "piecewise") {
        b.kind = BasisKind::PiecewisePolynomial;
    } else {
        throw ConfigError("config key '" + s.key_path("kind") + "' must be bspline or piecewise_polynomial");
    }
    b.degree = s.get_or<int>("degree", 2);
    if (b.degree < 0) throw ConfigError("config key '" + s.key_path("degree") + "' must be >= 0");
    const std::string knots_key = s.has("knots_per_dim") ? "knots_per_dim" : "knots";
    b.knots_per_dim = list_of<int>(s, knots_key);
    for (int k : b.knots_per_dim) {
        if (k < 1) throw ConfigError("config key '" + s.key_path(knots_key) + "' entries must be >= 1");
    }
    b.pad_fraction = s.get_or<double>("pad_fraction", 0.0);
    if (!(b.pad_fraction >= 0.0)) throw ConfigError("config key '" + s.key_path("pad_fraction") + "' must be >= 0");
    return b;
}

EstimateSection parse_estimate(const Section& s) {
    s.only({"mode", "covariance", "covariance_form", "solver"});
    EstimateSection e;
    const std::string mode = lower(s.get_or<std::string>("mode", "drift"));
    if (mode == "drift") e.mode = EstimateSection::Mode::Drift;
    else if (mode == "covariance") e.mode = EstimateSection::Mode::Covariance;
    else if (mode == "both") e.mode = EstimateSection::Mode::Both;
    else throw ConfigError("config key '" + s.key_path("mode") + "' must be drift, covariance or both");

    const std::string cov = lower(s.get_or<std::string>("covariance", "known"));
    if (cov == "known") e.covariance = EstimateSection::Covariance::Known;
    else if (cov == "estimate-first" || cov == "estimate_first") e.covariance = EstimateSection::Covariance::EstimateFirst;
    else throw ConfigError("config key '" + s.key_path("covariance") + "' must be known or estimate-first");

    const std::string form = lower(s.get_or<std::string>("covariance_form", "constant"));
    if (form == "constant") e.covariance_form = EstimateSection::Form::Constant;
    else if (form == "state_dependent" || form == "state-dependent") e.covariance_form = EstimateSection::Form::StateDependent;
    else throw ConfigError("config key '" + s.key_path("covariance_form") + "' must be constant or state_dependent");

    const std::string solver = lower(s.get_or<std::string>("solver", "auto"));
    if (solver == "auto") e.solver = SolverPath::Auto;
    else if (solver == "diagonal") e.solver = SolverPath::Diagonal;
    else if (solver == "full") e.solver = SolverPath::Full;
    else throw ConfigError("config key '" + s.key_path("solver") + "' must be auto, diagonal or full");
    return e;
}

EvaluateSection parse_evaluate(const Section& s) {
    s.only({"times", "w2_cap"});
    EvaluateSection e;
    if (s.has("times")) e.times = list_of<double>(s, "times");
    const auto cap = s.get_or<long long>("w2_cap", 1000);
    if (cap < 1) throw ConfigError("config key '" + s.key_path("w2_cap") + "' must be >= 1");
    e.w2_cap = static_cast<std::size_t>(cap);
    return e;
}

OutputSection parse_output(const Section& s) {
    s.only({"directory", "formats"});
    OutputSection o;
    o.directory = s.get_or<std::string>("directory", "out");
    if (s.has("formats")) {
        o.binary = false;
        o.csv = false;
        for (const auto& f : list_of<std::string>(s, "formats")) {
            const std::string v = lower(f);
            if (v == "binary") o.binary = true;
            else if (v == "csv") o.csv = true;
            else throw ConfigError("config key '" + s.key_path("formats") + "' entries must be binary or csv");
        }
    }
    return o;
}

AgentSection parse_agents(const Section& s) {
    s.only({"N", "agent_dim", "phi", "sigma", "initial"});
    AgentSection a;
    const auto N = s.get<long long>("N");
    const auto dp = s.get_or<long long>("agent_dim", 2);
    if (N < 2) throw ConfigError("config key '" + s.key_path("N") + "' must be >= 2");
    if (dp < 1) throw ConfigError("config key '" + s.key_path("agent_dim") + "' must be >= 1");
    a.system.agents = static_cast<std::size_t>(N);
    a.system.agent_dim = static_cast<std::size_t>(dp);
    a.phi_source = s.get<std::string>("phi");
    a.system.phi = expr_at(a.phi_source, {"r"}, s.key_path("phi"));
    const auto sig = matrix_sources(s, "sigma", a.system.agent_dim);
    a.system.sigma.resize(dp, dp);
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const ScalarExpr e = expr_at(sig[i], std::vector<std::string>{}, s.key_path("sigma"));
        a.system.sigma(static_cast<Eigen::Index>(i / a.system.agent_dim), static_cast<Eigen::Index>(i % a.system.agent_dim)) =
            e.eval(std::span<const double>());
    }
    a.system.initial = parse_initial(s.child("initial"), a.system.agent_dim);
    try {
        a.system.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("config section '" + s.key_path("") + "': " + e.what());
    }
    return a;
}

}  // namespace

BasisSpec BasisSection::spec_for(const TrajectoryBundle& bundle) const {
    BasisSpec spec;
    spec.kind = kind;
    spec.degree = degree;
    const std::size_t d = bundle.dim();
    if (knots_per_dim.size() == 1) {
        spec.knots_per_dim.assign(d, knots_per_dim[0]);
    } else if (knots_per_dim.size() == d) {
        spec.knots_per_dim = knots_per_dim;
    } else {
        throw ConfigError("config key 'basis.knots_per_dim' has " + std::to_string(knots_per_dim.size()) +
                          " entries for " + std::to_string(d) + "-dimensional data");
    }
    spec.domain = build_domain(bundle, pad_fraction);
    return spec;
}

const SdeModel& ExperimentConfig::require_model() const {
    if (!model) throw ConfigError("missing config section 'model'");
    return *model;
}

const SimConfig& ExperimentConfig::require_simulate() const {
    if (!simulate) throw ConfigError("missing config section 'simulate'");
    return *simulate;
}

const BasisSection& ExperimentConfig::require_basis() const {
    if (!basis) throw ConfigError("missing config section 'basis'");
    return *basis;
}

const AgentSection& ExperimentConfig::require_agents() const {
    if (!agents) throw ConfigError("missing config section 'agents'");
    return *agents;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& origin) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("config is not valid YAML: " + std::string(e.what()));
    }
    if (root.IsNull()) throw ConfigError("config is empty");
    const Section top(root, "");
    top.only({"model", "simulate", "basis", "covariance_basis", "estimate", "evaluate", "output", "agents", "kernel_basis"});

    ExperimentConfig cfg;
    cfg.source_text = text;
    cfg.source_path = origin;
    if (top.has("model")) cfg.model = parse_model(top.child("model"));
    if (top.has("simulate")) cfg.simulate = parse_simulate(top.child("simulate"));
    if (top.has("basis")) cfg.basis = parse_basis(top.child("basis"));
    if (top.has("covariance_basis")) cfg.covariance_basis = parse_basis(top.child("covariance_basis"));
    if (top.has("estimate")) cfg.estimate = parse_estimate(top.child("estimate"));
    if (top.has("evaluate")) cfg.evaluate = parse_evaluate(top.child("evaluate"));
    if (top.has("output")) cfg.output = parse_output(top.child("output"));
    if (top.has("agents")) {
        cfg.agents = parse_agents(top.child("agents"));
        cfg.agents->kernel_basis = top.has("kernel_basis") ? parse_basis(top.child("kernel_basis")) : BasisSection{};
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path);
}

}  // namespace sdelearn::cli
