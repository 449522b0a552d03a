// Scenario runner: one subcommand per experiment plus run-all over a
// scenario file. Exit codes: 0 success, 2 configuration/schema error,
// 3 numerical failure, 4 infeasible plan.

#include <CLI11.hpp>

#include <cstdio>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "spinmux/scenarios.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string preset = "two_ion";
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    std::string params_json = "{}";
    std::string name;
};

spinmux::config::Config resolve_config(const CommonArgs& args) {
    if (!args.config_path.empty())
        return spinmux::config::load_config(args.config_path);
    if (args.preset == "two_ion") return spinmux::config::preset_two_ion();
    if (args.preset == "four_ion") return spinmux::config::preset_four_ion();
    throw spinmux::ConfigError("unknown preset '" + args.preset +
                               "' (expected two_ion or four_ion)");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const spinmux::InfeasibleError*>(&e)) return 4;
    if (dynamic_cast<const spinmux::NumericalError*>(&e)) return 3;
    if (dynamic_cast<const spinmux::ConfigError*>(&e)) return 2;
    if (dynamic_cast<const spinmux::InputError*>(&e)) return 2;
    return 1;
}

int run_one(const spinmux::cli::Scenario& scenario,
            const spinmux::config::Config& cfg) {
    try {
        spinmux::cli::run_scenario(scenario, cfg);
        std::printf("[ok] %s (%s) -> %s/%s\n", scenario.name.c_str(),
                    scenario.experiment.c_str(), scenario.output_dir.c_str(),
                    scenario.name.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "[fail] %s: %s\n", scenario.name.c_str(), e.what());
        return exit_code_for(e);
    }
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path,
                    "configuration JSON (defaults to a built-in preset)");
    cmd->add_option("--preset", args.preset, "built-in preset: two_ion|four_ion");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "random seed");
    cmd->add_option("--params", args.params_json,
                    "experiment parameters as a JSON object");
    cmd->add_option("--name", args.name, "scenario name (default: experiment)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"frequency-multiplexed spin control simulator"};
    app.require_subcommand(1);

    std::vector<std::pair<std::string, CommonArgs>> jobs;
    CommonArgs run_all_args;
    std::string scenario_file;
    int parallel_jobs = 1;

    for (const auto& experiment : spinmux::cli::experiment_names()) {
        auto args = std::make_shared<CommonArgs>();
        CLI::App* cmd = app.add_subcommand(experiment, "run the " + experiment +
                                                           " experiment");
        add_common(cmd, *args);
        cmd->callback([&jobs, experiment, args]() {
            jobs.emplace_back(experiment, *args);
        });
    }

    CLI::App* run_all = app.add_subcommand("run-all", "run a scenario file");
    add_common(run_all, run_all_args);
    run_all->add_option("--scenarios", scenario_file, "scenario list JSON")
        ->required();
    run_all->add_option("--jobs", parallel_jobs,
                        "parallelism across scenarios (never within)");

    CommonArgs dump_args;
    bool do_dump = false;
    CLI::App* dump = app.add_subcommand(
        "dump-config", "print a preset or loaded configuration as JSON");
    dump->add_option("--config", dump_args.config_path, "configuration JSON");
    dump->add_option("--preset", dump_args.preset, "two_ion|four_ion");
    dump->callback([&do_dump]() { do_dump = true; });

    CLI11_PARSE(app, argc, argv);

    if (do_dump) {
        try {
            std::cout << spinmux::config::config_to_json(resolve_config(dump_args))
                             .dump(2)
                      << "\n";
            return 0;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return exit_code_for(e);
        }
    }

    try {
        if (!jobs.empty()) {
            const auto& [experiment, args] = jobs.front();
            spinmux::cli::Scenario scenario;
            scenario.name = args.name.empty() ? experiment : args.name;
            scenario.experiment = experiment;
            scenario.seed = args.seed;
            scenario.output_dir = args.out_dir;
            scenario.parameters = nlohmann::json::parse(args.params_json);
            return run_one(scenario, resolve_config(args));
        }

        // run-all
        const auto cfg = resolve_config(run_all_args);
        auto scenarios = spinmux::cli::load_scenario_file(scenario_file,
                                                          run_all_args.out_dir);
        if (scenarios.empty()) return 0;
        int worst = 0;
        if (parallel_jobs <= 1) {
            for (const auto& s : scenarios) worst = std::max(worst, run_one(s, cfg));
        } else {
            std::vector<std::future<int>> futures;
            std::size_t next = 0;
            while (next < scenarios.size() || !futures.empty()) {
                while (next < scenarios.size() &&
                       futures.size() < static_cast<std::size_t>(parallel_jobs)) {
                    const auto& s = scenarios[next++];
                    futures.push_back(std::async(std::launch::async, run_one,
                                                 std::cref(s), std::cref(cfg)));
                }
                worst = std::max(worst, futures.front().get());
                futures.erase(futures.begin());
            }
        }
        return worst;
    } catch (const nlohmann::json::parse_error& e) {
        std::fprintf(stderr, "error: bad --params JSON: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
}
