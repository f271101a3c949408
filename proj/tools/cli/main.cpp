#include "commands.hpp"

#include "sdelearn/error.hpp"
#include "sdelearn/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <thread>

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kNumericalError = 2 };

}  // namespace

int main(int argc, char** argv) {
    using namespace sdelearn::cli;

    CLI::App app{"Learn drift and diffusion of SDEs from trajectory data"};
    app.require_subcommand(1);
    app.set_version_flag("--version", SDELEARN_VERSION);

    GlobalOptions global;
    std::string config, out;
    std::uint64_t seed = 0;
    auto* config_opt = app.add_option("--config", config, "Experiment config (YAML)")->check(CLI::ExistingFile);
    auto* out_opt = app.add_option("--out", out, "Output directory (overrides output.directory)");
    auto* seed_opt = app.add_option("--seed", seed, "Simulation seed (overrides simulate.seed)");
    app.add_option("--threads", global.threads, "Worker threads (0 = hardware concurrency)");

    InputFiles files;
    auto* simulate = app.add_subcommand("simulate", "Simulate trajectories of the configured model");
    auto* estimate = app.add_subcommand("estimate", "Fit drift and/or covariance to a trajectory file");
    estimate->add_option("--trajectories", files.trajectories, "Trajectory file (default <out>/trajectories.bin)");
    auto* evaluate = app.add_subcommand("evaluate", "Replay with the fitted drift and report error measures");
    evaluate->add_option("--trajectories", files.trajectories, "Trajectory file (default <out>/trajectories.bin)");
    evaluate->add_option("--drift", files.drift, "Drift estimate (default <out>/drift.sdef)");
    auto* interacting = app.add_subcommand("interacting", "Simulate agents and learn the interaction kernel");

    SpdeOptions spde_opt;
    auto* spde = app.add_subcommand("spde", "Parameter estimation for the stochastic heat equation");
    spde->add_option("--modes", spde_opt.modes, "Mode counts N")->delimiter(',');
    spde->add_option("--M", spde_opt.trajectories, "Trajectory counts M")->delimiter(',');
    auto* theta = spde->add_option("--theta", spde_opt.theta, "Constant diffusivity (default 2)");
    auto* theta1 = spde->add_option("--theta1", spde_opt.theta1, "Diffusivity on the first half");
    auto* theta2 = spde->add_option("--theta2", spde_opt.theta2, "Diffusivity on the second half");
    theta->excludes(theta1)->excludes(theta2);
    theta1->needs(theta2);
    theta2->needs(theta1);
    spde->add_option("--sigma", spde_opt.sigma, "Noise level (default 0.1 constant, 0.5 piecewise)");
    spde->add_option("--dt", spde_opt.dt, "Time step")->check(CLI::PositiveNumber);
    spde->add_option("--T", spde_opt.T, "Horizon")->check(CLI::PositiveNumber);
    spde->add_option("--seeds", spde_opt.seeds, "Replications averaged per cell")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    if (*config_opt) global.config = config;
    if (*out_opt) global.out = out;
    if (*seed_opt) global.seed = seed;
    sdelearn::set_thread_count(global.threads ? global.threads : std::max(1u, std::thread::hardware_concurrency()));

    try {
        if (*simulate) cmd_simulate(global, std::cout);
        else if (*estimate) cmd_estimate(global, files, std::cout);
        else if (*evaluate) cmd_evaluate(global, files, std::cout);
        else if (*interacting) cmd_interacting(global, std::cout);
        else if (*spde) cmd_spde(global, spde_opt, std::cout);
    } catch (const sdelearn::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const sdelearn::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumericalError;
    }
    return kOk;
}
