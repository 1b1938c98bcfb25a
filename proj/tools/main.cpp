#include <CLI11.hpp>
#include <string>
#include <vector>

#include "tad/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Trust-aware dataset distillation under noisy labels"};
    app.require_subcommand(1);

    tad::RunOptions run_opt;
    std::string run_out;
    long long run_seed = -1;
    auto* run = app.add_subcommand("run", "Run the full pipeline from a config file");
    run->add_option("--config", run_opt.config_path, "Experiment config (JSON)")->required();
    run->add_option("--seed", run_seed, "Override the global seed");
    run->add_option("--set", run_opt.overrides, "Config override KEY=VALUE (repeatable)");
    run->add_option("--out", run_out, "Output directory (overrides config)");

    tad::EvalOptions eval_opt;
    std::string eval_config;
    int eval_repeats = -1;
    auto* eval = app.add_subcommand("eval", "Re-evaluate a saved synthetic set");
    eval->add_option("dir", eval_opt.artifact_dir, "Artifact directory from a previous run")->required();
    eval->add_option("--config", eval_config, "Config to evaluate against (default: embedded echo)");
    eval->add_option("--repeats", eval_repeats, "Number of student repeats");

    tad::SweepOptions sweep_opt;
    long long sweep_seed = -1;
    auto* sweep = app.add_subcommand("sweep", "Run one experiment per axis value");
    sweep->add_option("--config", sweep_opt.config_path, "Experiment config (JSON)")->required();
    sweep->add_option("--axis", sweep_opt.axis, "Config key to sweep (dotted path)")->required();
    sweep->add_option("--values", sweep_opt.values, "Axis values (JSON literals)")
        ->required()
        ->delimiter(',');
    sweep->add_option("--out", sweep_opt.out_dir, "Output directory");
    sweep->add_option("--seed", sweep_seed, "Override the global seed");
    sweep->add_option("--set", sweep_opt.overrides, "Config override KEY=VALUE (repeatable)");
    sweep->add_option("--parallel", sweep_opt.parallel, "Concurrent sweep points");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (run_seed >= 0) run_opt.seed = static_cast<std::uint64_t>(run_seed);
        if (!run_out.empty()) run_opt.out_dir = run_out;
        return tad::cmd_run(run_opt);
    }
    if (eval->parsed()) {
        if (!eval_config.empty()) eval_opt.config_path = eval_config;
        if (eval_repeats > 0) eval_opt.repeats = eval_repeats;
        return tad::cmd_eval(eval_opt);
    }
    if (sweep_seed >= 0) sweep_opt.seed = static_cast<std::uint64_t>(sweep_seed);
    return tad::cmd_sweep(sweep_opt);
}
