#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "scorebayes/cli_io.hpp"

namespace {

using scorebayes::cli_io::ConfigError;
using scorebayes::cli_io::ExperimentConfig;

ExperimentConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
    ExperimentConfig cfg = ExperimentConfig::from_file(path);
    if (seed) cfg.values["seed"] = std::to_string(*seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian inference with proper scoring rules"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", example;
    std::optional<std::uint64_t> seed;
    std::uint64_t reproduce_seed = 1;

    auto* estimate = app.add_subcommand("estimate", "Minimum-score fit and Godambe information");
    estimate->add_option("--config", config_path, "Experiment config file")->required();
    estimate->add_option("--out", out_dir, "Output directory");
    estimate->add_option("--seed", seed, "Override the config seed");

    auto* sample = app.add_subcommand("sample", "Posterior sampling by random-walk Metropolis");
    sample->add_option("--config", config_path, "Experiment config file")->required();
    sample->add_option("--out", out_dir, "Output directory");
    sample->add_option("--seed", seed, "Override the config seed");

    auto* prior_eval = app.add_subcommand("prior-eval", "Tabulate the reference prior");
    prior_eval->add_option("--config", config_path, "Experiment config file")->required();
    prior_eval->add_option("--out", out_dir, "Output directory");
    prior_eval->add_option("--seed", seed, "Override the config seed");

    auto* reproduce = app.add_subcommand("reproduce", "Emit the worked-example plot data");
    reproduce->add_option("example", example, "One of vmf, eqcorr, regression")->required();
    reproduce->add_option("--out", out_dir, "Output directory");
    reproduce->add_option("--seed", reproduce_seed, "Pipeline seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }

    try {
        if (estimate->parsed()) {
            scorebayes::cli_io::cmd_estimate(load_config(config_path, seed), out_dir);
        } else if (sample->parsed()) {
            scorebayes::cli_io::cmd_sample(load_config(config_path, seed), out_dir);
        } else if (prior_eval->parsed()) {
            scorebayes::cli_io::cmd_prior_eval(load_config(config_path, seed), out_dir);
        } else if (reproduce->parsed()) {
            scorebayes::cli_io::cmd_reproduce(example, out_dir, reproduce_seed);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
