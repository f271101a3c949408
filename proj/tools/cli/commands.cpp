#include "commands.hpp"

#include "output.hpp"

#include "sdelearn/covariance_estimator.hpp"
#include "sdelearn/error.hpp"
#include "sdelearn/estimate_io.hpp"
#include "sdelearn/metrics.hpp"
#include "sdelearn/parallel.hpp"
#include "sdelearn/spde.hpp"
#include "sdelearn/trajectory_io.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace sdelearn::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kTrajectoryFile = "trajectories.bin";
constexpr const char* kDriftFile = "drift.sdef";
constexpr const char* kCovarianceFile = "covariance.sdec";

ExperimentConfig load(const GlobalOptions& global) {
    if (!global.config) throw ConfigError("--config is required for this command");
    return load_config(*global.config);
}

fs::path output_dir(const GlobalOptions& global, const ExperimentConfig* cfg) {
    fs::path dir = global.out ? *global.out : (cfg ? cfg->output.directory : fs::path("out"));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

SimConfig sim_config(const ExperimentConfig& cfg, const GlobalOptions& global) {
    SimConfig sim = cfg.require_simulate();
    if (global.seed) sim.seed = *global.seed;
    return sim;
}

Manifest make_manifest(const std::string& command, const ExperimentConfig& cfg, const GlobalOptions& global) {
    Manifest m(command, cfg.source_text, cfg.source_path.string());
    if (cfg.simulate) m.set("seed", sim_config(cfg, global).seed);
    return m;
}

fs::path input_or(const fs::path& given, const fs::path& dir, const char* name) {
    const fs::path p = given.empty() ? dir / name : given;
    if (!fs::exists(p)) throw ConfigError("input file not found: " + p.string());
    return p;
}

void check_dims(const SdeModel& model, const TrajectoryBundle& bundle) {
    if (model.dim() != bundle.dim()) {
        throw ConfigError("model.dim is " + std::to_string(model.dim()) + " but the trajectory file has dimension " +
                          std::to_string(bundle.dim()));
    }
}

std::shared_ptr<const BasisSet> basis_for(const BasisSection& section, const TrajectoryBundle& bundle) {
    return std::make_shared<const BasisSet>(make_basis(section.spec_for(bundle)));
}

std::string matrix_text(const Eigen::MatrixXd& m) {
    std::ostringstream out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << "  [";
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? ", " : "") << format_double(m(r, c));
        out << "]\n";
    }
    return out.str();
}

std::shared_ptr<const CovarianceEstimate> run_covariance(const ExperimentConfig& cfg, const TrajectoryBundle& bundle,
                                                         std::ostream& report) {
    std::shared_ptr<const CovarianceEstimate> est;
    if (cfg.estimate.covariance_form == EstimateSection::Form::Constant) {
        est = std::make_shared<const CovarianceEstimate>(estimate_constant(bundle));
        report << "covariance form: constant\n" << matrix_text(est->constant_value());
        if (est->clamped()) report << "warning: estimate was clamped to the PSD cone\n";
        if (cfg.model && cfg.model->has_constant_sigma() && cfg.model->dim() == bundle.dim()) {
            const std::vector<double> origin(bundle.dim(), 0.0);
            const Eigen::MatrixXd s = eval_sigma(*cfg.model, origin);
            const Eigen::MatrixXd truth = s * s.transpose();
            report << "relative Frobenius error vs sigma sigma^T: "
                   << format_double((est->constant_value() - truth).norm() / truth.norm()) << "\n";
        }
    } else {
        const BasisSection& section = cfg.covariance_basis ? *cfg.covariance_basis : cfg.require_basis();
        est = std::make_shared<const CovarianceEstimate>(estimate_state_dependent(bundle, basis_for(section, bundle)));
        report << "covariance form: state_dependent, basis size " << est->coeffs().rows() << "\n";
        if (est->regularized()) report << "warning: ridge regularisation was applied\n";
    }
    return est;
}

}  // namespace

void cmd_simulate(const GlobalOptions& global, std::ostream& log) {
    const ExperimentConfig cfg = load(global);
    const SdeModel& model = cfg.require_model();
    const SimConfig sim = sim_config(cfg, global);
    const fs::path dir = output_dir(global, &cfg);

    const TrajectoryBundle bundle = euler_maruyama(model, sim);
    Manifest manifest = make_manifest("simulate", cfg, global);
    if (cfg.output.binary) {
        write_trajectories(dir / kTrajectoryFile, bundle);
        manifest.add_output(dir / kTrajectoryFile);
    }
    if (cfg.output.csv) {
        write_trajectories_csv(dir / "trajectories.csv", bundle);
        manifest.add_output(dir / "trajectories.csv");
    }
    manifest.set("d", bundle.dim());
    manifest.set("L", bundle.steps());
    manifest.set("M", bundle.count());
    manifest.write(dir);
    log << "simulated " << bundle.count() << " trajectories, d = " << bundle.dim() << ", L = " << bundle.steps()
        << " -> " << dir.string() << "\n";
}

void cmd_estimate(const GlobalOptions& global, const InputFiles& files, std::ostream& log) {
    const ExperimentConfig cfg = load(global);
    const fs::path dir = output_dir(global, &cfg);
    const fs::path traj_path = input_or(files.trajectories, dir, kTrajectoryFile);
    const TrajectoryBundle bundle = read_trajectories(traj_path);

    const auto& est_cfg = cfg.estimate;
    const bool want_cov = est_cfg.mode != EstimateSection::Mode::Drift ||
                          est_cfg.covariance == EstimateSection::Covariance::EstimateFirst;
    const bool want_drift = est_cfg.mode != EstimateSection::Mode::Covariance;

    Manifest manifest = make_manifest("estimate", cfg, global);
    manifest.set("trajectories", traj_path.string());
    manifest.set("trajectories_sha256", sha256_file(traj_path));
    std::ostringstream report;

    std::shared_ptr<const CovarianceEstimate> cov_est;
    if (want_cov) {
        cov_est = run_covariance(cfg, bundle, report);
        write_covariance(dir / kCovarianceFile, *cov_est);
        manifest.add_output(dir / kCovarianceFile);
    }

    if (want_drift) {
        CovModel cov = cov_est ? CovModel::estimated(cov_est) : [&] {
            const SdeModel& model = cfg.require_model();
            check_dims(model, bundle);
            return CovModel::from_diffusion(model);
        }();
        const auto basis = basis_for(cfg.require_basis(), bundle);
        const NormalSystem system = assemble(bundle, *basis, cov, est_cfg.solver);
        const DriftEstimate drift = solve(system, basis);
        write_drift(dir / kDriftFile, drift);
        manifest.add_output(dir / kDriftFile);
        report << "drift: basis size " << drift.basis_size() << ", degree " << cfg.require_basis().degree << ", "
               << (system.layout == NormalSystem::Layout::Coupled ? "coupled" : "per-dimension") << " solve\n"
               << "training loss: " << format_double(quadratic_loss(system, drift.coeffs())) << "\n";
        if (drift.regularized()) report << "warning: ridge regularisation was applied\n";
    }

    write_text(dir / "estimate_summary.txt", report.str());
    manifest.add_output(dir / "estimate_summary.txt");
    manifest.write(dir);
    log << report.str();
}

void cmd_evaluate(const GlobalOptions& global, const InputFiles& files, std::ostream& log) {
    const ExperimentConfig cfg = load(global);
    const SdeModel& model = cfg.require_model();
    const fs::path dir = output_dir(global, &cfg);
    const fs::path traj_path = input_or(files.trajectories, dir, kTrajectoryFile);
    const fs::path drift_path = input_or(files.drift, dir, kDriftFile);

    const TrajectoryBundle bundle = read_trajectories(traj_path);
    check_dims(model, bundle);
    if (!bundle.has_noise()) {
        throw ConfigError("trajectory file " + traj_path.string() +
                          " has no noise record; re-run `sdelearn simulate` with simulate.record_noise: true");
    }
    const DriftEstimate drift = read_drift(drift_path);
    if (drift.dim() != bundle.dim()) throw ConfigError("drift estimate dimension does not match the trajectories");

    const VectorField truth = drift_field(model);
    const VectorField fitted = drift.field();
    const FunctionError l2 = l2_rho_error(truth, fitted, EmpiricalRho::from_bundle(bundle));
    const TrajectoryBundle replayed = replay(model, bundle, fitted);
    const TrajectoryErrorStats traj = trajectory_error(bundle, replayed);

    TextTable table({"metric", "value"});
    table.add_row({"number_of_basis", std::to_string(drift.basis_size())});
    table.add_row({"maximum_degree", std::to_string(drift.basis().factors().front().degree())});
    table.add_row({"relative_l2_rho_error", l2.relative ? format_double(*l2.relative) : "nan"});
    table.add_row({"absolute_l2_rho_error", format_double(l2.absolute)});
    table.add_row({"trajectory_error_mean", format_double(traj.mean)});
    table.add_row({"trajectory_error_std", format_double(traj.std)});
    W2Options w2;
    w2.cap = cfg.evaluate.w2_cap;
    for (double t : cfg.evaluate.times) {
        if (t < 0.0 || t > bundle.grid().horizon() + 1e-12) {
            throw ConfigError("config key 'evaluate.times' entry " + format_double(t) + " is outside [0, T]");
        }
        const double w = wasserstein2(snapshot(bundle, t), snapshot(replayed, t), w2);
        table.add_row({"w2_t=" + format_double(t), format_double(w)});
    }

    write_text(dir / "summary.csv", table.csv());
    write_text(dir / "summary.txt", table.render());
    write_text(dir / "drift_grid.csv", drift_grid_csv(truth, drift, bundle.dim() == 1 ? 201 : bundle.dim() == 2 ? 41 : 11));

    Manifest manifest = make_manifest("evaluate", cfg, global);
    manifest.set("trajectories_sha256", sha256_file(traj_path));
    manifest.set("drift_sha256", sha256_file(drift_path));
    for (const char* f : {"summary.csv", "summary.txt", "drift_grid.csv"}) manifest.add_output(dir / f);
    manifest.write(dir);
    log << table.render();
}

void cmd_interacting(const GlobalOptions& global, std::ostream& log) {
    const ExperimentConfig cfg = load(global);
    const AgentSection& agents = cfg.require_agents();
    const AgentSystem& sys = agents.system;
    const SimConfig sim = sim_config(cfg, global);
    const fs::path dir = output_dir(global, &cfg);

    const TrajectoryBundle bundle = simulate_agents(sys, sim);
    Manifest manifest = make_manifest("interacting", cfg, global);
    if (cfg.output.binary) {
        write_trajectories(dir / kTrajectoryFile, bundle);
        manifest.add_output(dir / kTrajectoryFile);
    }

    BasisSpec spec;
    spec.kind = agents.kernel_basis.kind;
    spec.degree = agents.kernel_basis.degree;
    spec.knots_per_dim = {agents.kernel_basis.knots_per_dim.front()};
    spec.domain = Domain{{0.0}, {1.0}};
    const KernelEstimate kernel = learn_kernel(bundle, sys.agents, sys.agent_dim, spec, sys.sigma);
    const ScalarExpr phi = sys.phi;
    const auto phi_fn = [phi](double r) { return phi.eval(std::span<const double>(&r, 1)); };
    const FunctionError err = kernel_error(bundle, sys.agents, sys.agent_dim, phi_fn, kernel);

    std::ostringstream csv;
    csv << "r,phi,phi_hat\n";
    const Domain dom = kernel.basis().domain();
    constexpr int kPoints = 201;
    for (int i = 0; i < kPoints; ++i) {
        const double r = dom.lower[0] + (dom.upper[0] - dom.lower[0]) * i / (kPoints - 1);
        csv << format_double(r) << ',' << format_double(phi_fn(r)) << ',' << format_double(kernel(r)) << '\n';
    }
    write_text(dir / "kernel.csv", csv.str());
    manifest.add_output(dir / "kernel.csv");

    TextTable table({"metric", "value"});
    table.add_row({"agents", std::to_string(sys.agents)});
    table.add_row({"agent_dim", std::to_string(sys.agent_dim)});
    table.add_row({"number_of_basis", std::to_string(kernel.coeffs().size())});
    table.add_row({"distance_min", format_double(dom.lower[0])});
    table.add_row({"distance_max", format_double(dom.upper[0])});
    table.add_row({"kernel_relative_l2_error", err.relative ? format_double(*err.relative) : "nan"});
    table.add_row({"kernel_absolute_l2_error", format_double(err.absolute)});
    write_text(dir / "summary.csv", table.csv());
    write_text(dir / "summary.txt", table.render());
    manifest.add_output(dir / "summary.csv");
    manifest.add_output(dir / "summary.txt");
    manifest.write(dir);
    log << table.render();
}

void cmd_spde(const GlobalOptions& global, const SpdeOptions& opt, std::ostream& log) {
    const bool piecewise = opt.theta1.has_value() || opt.theta2.has_value();
    if (piecewise && !(opt.theta1 && opt.theta2)) throw ConfigError("--theta1 and --theta2 must be given together");
    if (piecewise && opt.theta) throw ConfigError("--theta cannot be combined with --theta1/--theta2");
    if (opt.seeds == 0) throw ConfigError("--seeds must be >= 1");
    if (opt.modes.empty() || opt.trajectories.empty()) throw ConfigError("--modes and --M need at least one value");
    const std::uint64_t base_seed = global.seed.value_or(0);
    const fs::path dir = output_dir(global, nullptr);
    const double sigma = opt.sigma.value_or(piecewise ? 0.5 : 0.1);

    Manifest manifest("spde", "", "");
    manifest.set("seed", base_seed);
    manifest.set("seeds", opt.seeds);
    manifest.set("sigma", sigma);
    manifest.set("dt", opt.dt);
    manifest.set("T", opt.T);
    manifest.set("modes", opt.modes);
    manifest.set("M", opt.trajectories);

    const auto header_row = [&](const std::string& first) {
        std::vector<std::string> h{first};
        for (auto n : opt.modes) h.push_back("N=" + std::to_string(n));
        return h;
    };

    if (!piecewise) {
        const double theta = opt.theta.value_or(2.0);
        manifest.set("theta", theta);
        TextTable estimates(header_row("M"));
        TextTable errors(header_row("M"));
        for (std::size_t M : opt.trajectories) {
            std::vector<std::string> est_row{std::to_string(M)}, err_row{std::to_string(M)};
            for (std::size_t N : opt.modes) {
                const SpdeSpec spec = SpdeSpec::heat_constant(N, theta, sigma, opt.T, opt.dt, M);
                double sum = 0.0, abs_err = 0.0;
                for (std::size_t s = 0; s < opt.seeds; ++s) {
                    const double th = estimate_theta_constant(simulate_modes(spec, base_seed + s), spec);
                    sum += th;
                    abs_err += std::abs(th - theta);
                }
                est_row.push_back(format_double(sum / static_cast<double>(opt.seeds)));
                err_row.push_back(format_double(abs_err / static_cast<double>(opt.seeds)));
            }
            estimates.add_row(std::move(est_row));
            errors.add_row(std::move(err_row));
        }
        write_text(dir / "spde_constant.csv", estimates.csv());
        write_text(dir / "spde_constant_error.csv", errors.csv());
        manifest.add_output(dir / "spde_constant.csv");
        manifest.add_output(dir / "spde_constant_error.csv");
        manifest.write(dir);
        log << "mean theta estimate\n" << estimates.render() << "\nmean |theta_hat - theta|\n" << errors.render();
        return;
    }

    const double t1 = *opt.theta1, t2 = *opt.theta2;
    manifest.set("theta1", t1);
    manifest.set("theta2", t2);
    TextTable table({"M", "N", "theta1_hat", "theta2_hat", "relative_l2_error"});
    for (std::size_t M : opt.trajectories) {
        for (std::size_t N : opt.modes) {
            const SpdeSpec spec = SpdeSpec::heat_piecewise(N, t1, t2, sigma, opt.T, opt.dt, M);
            const CouplingMatrices coupling = compute_coupling(spec);
            double s1 = 0.0, s2 = 0.0, err = 0.0;
            for (std::size_t s = 0; s < opt.seeds; ++s) {
                const auto est = estimate_theta_piecewise(simulate_modes(spec, base_seed + s), spec, coupling);
                s1 += est.theta1;
                s2 += est.theta2;
                err += std::hypot(est.theta1 - t1, est.theta2 - t2) / std::hypot(t1, t2);
            }
            const double k = static_cast<double>(opt.seeds);
            table.add_row({std::to_string(M), std::to_string(N), format_double(s1 / k), format_double(s2 / k),
                           format_double(err / k)});
        }
    }
    write_text(dir / "spde_piecewise.csv", table.csv());
    manifest.add_output(dir / "spde_piecewise.csv");
    manifest.write(dir);
    log << table.render();
}

}  // namespace sdelearn::cli
