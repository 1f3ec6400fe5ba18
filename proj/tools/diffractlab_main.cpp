#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "diffractlab/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory (overrides output.dir)");
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&args](const std::uint64_t& v) {
            args.seed = v;
            args.seed_set = true;
        },
        "seed override (overrides sampler.seed)");
}

dlab::experiment::ExperimentConfig load_config(const CommonArgs& args) {
    auto config = dlab::experiment::ExperimentConfig::from_file(args.config_path);
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    if (args.seed_set) config.seed = args.seed;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffractlab: particle-gas diffraction experiments on lattices and model sets"};
    app.require_subcommand(1);

    CommonArgs run_args;
    CLI::App* run_cmd = app.add_subcommand("run", "run the full pipeline and write a manifest");
    add_common(run_cmd, run_args);

    std::vector<std::pair<std::string, CommonArgs>> stage_args;
    for (const std::string& stage : dlab::experiment::stage_names()) {
        stage_args.emplace_back(stage, CommonArgs{});
    }
    for (auto& [stage, args] : stage_args) {
        CLI::App* cmd = app.add_subcommand(stage, "run the `" + stage + "` stage");
        add_common(cmd, args);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            return dlab::experiment::run_all(load_config(run_args), std::cout);
        }
        for (auto& [stage, args] : stage_args) {
            if (app.get_subcommand(stage)->parsed()) {
                return dlab::experiment::run_stage(load_config(args), stage, std::cout);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}
