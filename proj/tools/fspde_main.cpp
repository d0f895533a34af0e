#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fspde/config.hpp"
#include "fspde/run.hpp"

namespace {

struct Cli {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;

    fspde::RunOptions options() const {
        fspde::RunOptions opt;
        opt.out_dir = out_dir;
        if (seed_given) opt.seed_override = seed;
        opt.threads = threads;
        return opt;
    }

    fspde::ExperimentConfig load() const {
        if (config_path.empty())
            throw std::invalid_argument("this command needs --config <file>");
        return fspde::ExperimentConfig::from_file(config_path);
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pathwise laboratory for stochastic parabolic equations driven by "
                 "mode-wise fractional noise on horn-shaped domains"};
    app.set_version_flag("--version", "fspde 1.0.0");
    app.require_subcommand(1);

    Cli cli;
    app.add_option("--config", cli.config_path, "experiment config file (JSON)");
    auto* seed_opt =
        app.add_option("--seed", cli.seed, "override the config's top-level seed");
    app.add_option("--out", cli.out_dir, "output directory")->capture_default_str();
    app.add_option("--threads", cli.threads, "worker threads (0 = library default)");

    auto* simulate =
        app.add_subcommand("simulate", "run the solver over the configured ensemble");
    simulate->fallthrough();

    std::string suite = "all";
    auto* verify = app.add_subcommand("verify", "run a named verification suite");
    verify->fallthrough();
    verify->add_option("--suite", suite,
                       "noise | grr | regularity | embedding | residual | uniqueness | all")
        ->capture_default_str();

    std::size_t levels = 3;
    auto* convergence =
        app.add_subcommand("convergence", "coupled (dt, mesh, noise) refinement study");
    convergence->fallthrough();
    convergence->add_option("--levels", levels, "refinement levels (>= 2)")
        ->capture_default_str();

    double fbm_hurst = 0.75, fbm_horizon = 1.0;
    std::size_t fbm_steps = 256, fbm_count = 1;
    std::uint64_t fbm_seed = 1;
    bool fbm_binary = false;
    auto* fbm = app.add_subcommand("fbm-sample", "sample fractional Brownian paths");
    fbm->fallthrough();
    fbm->add_option("--hurst", fbm_hurst, "Hurst parameter in (0, 1)")
        ->capture_default_str();
    fbm->add_option("--horizon", fbm_horizon, "time horizon")->capture_default_str();
    fbm->add_option("--steps", fbm_steps, "number of grid steps")->capture_default_str();
    fbm->add_option("--count", fbm_count, "number of independent paths")
        ->capture_default_str();
    fbm->add_option("--fbm-seed", fbm_seed, "sampling seed (--seed overrides)")
        ->capture_default_str();
    fbm->add_flag("--binary", fbm_binary, "also write the binary column container");

    auto* domain =
        app.add_subcommand("domain-check", "curve admissibility and measure report");
    domain->fallthrough();

    CLI11_PARSE(app, argc, argv);
    cli.seed_given = seed_opt->count() > 0;

    try {
        if (simulate->parsed()) return fspde::cmd_simulate(cli.load(), cli.options());
        if (verify->parsed()) return fspde::cmd_verify(cli.load(), suite, cli.options());
        if (convergence->parsed())
            return fspde::cmd_convergence(cli.load(), levels, cli.options());
        if (fbm->parsed())
            return fspde::cmd_fbm_sample(fbm_hurst, fbm_horizon, fbm_steps, fbm_seed,
                                         fbm_count, fbm_binary, cli.options());
        if (domain->parsed()) return fspde::cmd_domain_check(cli.load(), cli.options());
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
