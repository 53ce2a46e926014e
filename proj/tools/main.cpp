// Command-line front end: run, sweep and compare the built-in experiments,
// emitting CSV or JSON rows with full provenance. Exit codes: 0 success,
// 1 configuration/validation error, 2 engine error. Diagnostics go to
// stderr; stdout (or --out) carries data only.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "emptywave/cli.hpp"

namespace {

struct CliState {
    ew::cli::RunConfig cfg;
    std::string theta;
    std::string config_path;
    std::string dump_path;
    bool seed_given = false;
    bool samples_given = false;
    bool format_given = false;
    ew::cli::SweepBlock sweep;
    bool sweep_given = false;
};

void add_common_options(CLI::App* cmd, CliState& st) {
    cmd->add_option("--experiment", st.cfg.experiment, "experiment name (see 'list')");
    cmd->add_option("--model", st.cfg.models,
                    "model to run: CI, Bohm3ND, DeBroglie3D or all (repeatable)");
    cmd->add_option("--delta-theta", st.theta,
                    "input relative phase in radians, or 'uniform'");
    cmd->add_option_function<double>(
        "--delta-phi", [&st](double v) { st.cfg.params["delta_phi"] = v; },
        "loop dephasing in radians");
    cmd->add_option_function<double>(
        "--tau", [&st](double v) { st.cfg.params["tau"] = v; }, "pair delay in time units");
    cmd->add_option_function<double>(
        "--sigma", [&st](double v) { st.cfg.params["sigma"] = v; }, "packet bandwidth");
    cmd->add_option_function<double>(
        "--alpha", [&st](double v) { st.cfg.params["alpha"] = v; }, "laser amplitude");
    cmd->add_option_function<int>(
        "--samples",
        [&st](int v) {
            st.cfg.samples = v;
            st.samples_given = true;
        },
        "Monte-Carlo samples per model");
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&st](std::uint64_t v) {
            st.cfg.seed = v;
            st.seed_given = true;
        },
        "RNG seed");
    cmd->add_option("--out", st.cfg.out, "output file (default: stdout)");
    cmd->add_option_function<std::string>(
                "--format",
                [&st](const std::string& v) {
                    st.cfg.format = v;
                    st.format_given = true;
                },
                "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--config", st.config_path, "read options from a config file");
    cmd->add_option("--dump-config", st.dump_path, "write the effective config to this path");
}

int run_one(CliState st, bool force_all_models) {
    try {
        ew::cli::RunConfig& cfg = st.cfg;
        if (st.sweep_given) cfg.sweep = st.sweep;
        if (!st.config_path.empty()) {
            ew::cli::RunConfig file_cfg = ew::cli::parse_config_file(st.config_path);
            if (cfg.experiment.empty()) cfg.experiment = file_cfg.experiment;
            if (cfg.models.empty()) cfg.models = file_cfg.models;
            for (const auto& [k, v] : file_cfg.params)
                if (!cfg.params.count(k)) cfg.params[k] = v;
            if (st.theta.empty()) cfg.theta_uniform = file_cfg.theta_uniform;
            if (!cfg.sweep) cfg.sweep = file_cfg.sweep;
            if (!st.samples_given) cfg.samples = file_cfg.samples;
            if (!st.seed_given) cfg.seed = file_cfg.seed;
            if (cfg.out.empty()) cfg.out = file_cfg.out;
            if (!st.format_given) cfg.format = file_cfg.format;
        } else if (!st.samples_given) {
            if (const char* env = std::getenv(ew::cli::kSamplesEnvVar))
                cfg.samples = std::atoi(env);
        }
        if (!st.theta.empty()) {
            if (st.theta == "uniform") {
                cfg.theta_uniform = true;
            } else {
                try {
                    size_t pos = 0;
                    cfg.params["delta_theta"] = std::stod(st.theta, &pos);
                    if (pos != st.theta.size()) throw std::invalid_argument(st.theta);
                } catch (const std::exception&) {
                    throw ew::cli::ConfigError(
                        "--delta-theta: expected a number or 'uniform'");
                }
            }
        }
        if (force_all_models) cfg.models = {"all"};
        if (cfg.experiment.empty())
            throw ew::cli::ConfigError("no experiment given (--experiment or --config)");

        if (!st.dump_path.empty()) {
            std::ofstream f(st.dump_path);
            if (!f)
                throw ew::cli::ConfigError("cannot write config to '" + st.dump_path + "'");
            f << ew::cli::dump_config(cfg);
        }

        ew::cli::CommandOutcome outcome;
        try {
            outcome = ew::cli::execute(cfg);
        } catch (const ew::cli::ConfigError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        } catch (const std::invalid_argument& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        } catch (const std::exception& e) {
            std::cerr << "engine error: " << e.what() << '\n';
            return 2;
        }
        for (const auto& pt : outcome.points)
            for (const auto& d : pt.divergences)
                std::cerr << "note: models diverge: " << d << '\n';
        return ew::cli::write_output(cfg, outcome);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"interferometer detector statistics under three physical models"};
    app.require_subcommand(1);

    CliState run_st, sweep_st, compare_st;

    CLI::App* run = app.add_subcommand("run", "run one experiment configuration");
    add_common_options(run, run_st);

    CLI::App* swp = app.add_subcommand("sweep", "sweep one parameter over a grid");
    add_common_options(swp, sweep_st);
    swp->add_option_function<std::string>(
        "--param",
        [&](const std::string& v) {
            sweep_st.sweep.param = v;
            sweep_st.sweep_given = true;
        },
        "parameter to sweep");
    swp->add_option("--from", sweep_st.sweep.from, "first grid value");
    swp->add_option("--to", sweep_st.sweep.to, "last grid value");
    swp->add_option("--steps", sweep_st.sweep.steps, "number of grid points");

    CLI::App* cmp = app.add_subcommand("compare", "run all models side by side");
    add_common_options(cmp, compare_st);

    CLI::App* lst = app.add_subcommand("list", "list experiments and models");

    CLI11_PARSE(app, argc, argv);

    if (lst->parsed()) {
        std::cout << "experiments:\n";
        for (const auto& n : ew::experiment_names()) std::cout << "  " << n << '\n';
        std::cout << "models:\n  CI\n  Bohm3ND\n  DeBroglie3D\n";
        std::cout << "sweepable parameters:\n  delta_theta delta_phi tau alpha\n";
        return 0;
    }
    if (run->parsed()) return run_one(run_st, false);
    if (swp->parsed()) return run_one(sweep_st, false);
    if (cmp->parsed()) return run_one(compare_st, true);
    return 1;
}
