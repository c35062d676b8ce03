#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "deepsplit/errors.hpp"
#include "deepsplit/experiment.hpp"
#include "deepsplit/oracles.hpp"
#include "deepsplit/paths.hpp"
#include "deepsplit/selftest.hpp"

using namespace deepsplit;

namespace {

struct CommonFlags {
    std::string config_file;
    std::vector<std::string> sets;
    std::vector<std::pair<std::string, std::string>> overrides;

    void add_to(CLI::App* app) {
        app->add_option("--config", config_file, "key = value config file");
        app->add_option("--set", sets, "override any config key, key=value (repeatable)");
    }

    // Each named flag becomes an override in command-line order.
    void flag(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(
            "--" + name, [this, key](const std::string& v) { overrides.emplace_back(key, v); }, help);
    }

    ExperimentConfig resolve() {
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + s + "'");
            overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        return config_file.empty() ? parse_config("", overrides) : parse_config_file(config_file, overrides);
    }
};

int cmd_run(CommonFlags& flags) {
    const ExperimentConfig config = flags.resolve();
    std::unique_ptr<std::ofstream> log;
    ExperimentHooks hooks;
    hooks.messages = &std::cerr;
    if (!config.log.empty()) {
        log = std::make_unique<std::ofstream>(config.log);
        if (!*log) throw std::runtime_error("cannot write '" + config.log + "'");
        hooks.training_log = log.get();
    }
    const ExperimentReport report = run_experiment(config, hooks);
    if (config.out.empty()) {
        write_report_csv(report, std::cout);
    } else {
        std::ofstream out(config.out);
        if (!out) throw std::runtime_error("cannot write '" + config.out + "'");
        write_report_csv(report, out);
    }
    std::cerr << problem_name(config.problem) << " d=" << config.dim
              << ": relative L2 error " << format_number(report.rel_l2) << '\n';
    return report.any_failed() ? 1 : 0;
}

int cmd_oracle(CommonFlags& flags) {
    const ExperimentConfig config = flags.resolve();
    const auto problem = config.make();
    const TimeGrid grid = make_grid(config.T, config.steps);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!config.out.empty()) {
        file.open(config.out);
        if (!file) throw std::runtime_error("cannot write '" + config.out + "'");
        out = &file;
    }
    *out << "problem,d,run,z_T,reference,std_error\n";
    for (int r = 0; r < config.runs; ++r) {
        const long run = config.run_offset + r;
        const RunStreams streams{config.seed, static_cast<std::uint64_t>(run)};
        RngStream noise_stream = streams.noise();
        const NoiseRealization z = sample_noise(*problem, grid, noise_stream, config.zakai_substeps);
        RngStream oracle_stream = streams.oracle();
        const McEstimate ref = reference_solution(*problem, z, config.x_eval, config.oracle, oracle_stream);
        *out << problem_name(config.problem) << ',' << config.dim << ',' << run << ','
             << format_number(z.terminal()(0)) << ',' << format_number(ref.value) << ','
             << format_number(ref.std_error) << '\n';
    }
    return 0;
}

int cmd_selftest() {
    int failed = 0;
    for (const auto& r : run_selftest()) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        failed += r.passed ? 0 : 1;
    }
    std::cout << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed") << '\n';
    return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep-splitting solver for stochastic PDEs"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "train R realizations and compare to the reference");
    run_flags.add_to(run);
    run_flags.flag(run, "problem", "problem", "heat-add | heat-mul | black-scholes | zakai");
    run_flags.flag(run, "dim", "dim", "spatial dimension d");
    run_flags.flag(run, "steps", "steps", "time steps N");
    run_flags.flag(run, "iters", "iters", "optimizer iterations M per step");
    run_flags.flag(run, "batch", "batch", "minibatch size J");
    run_flags.flag(run, "runs", "runs", "independent realizations R");
    run_flags.flag(run, "seed", "seed", "master seed");
    run_flags.flag(run, "out", "out", "results CSV (default stdout)");
    run_flags.flag(run, "log", "log", "training log CSV");
    run_flags.flag(run, "dump-dir", "dump_dir", "write parameter and noise dumps here");
    run_flags.flag(run, "progress", "progress_every", "progress line every k iterations");

    CommonFlags oracle_flags;
    CLI::App* oracle = app.add_subcommand("oracle", "evaluate the reference solution for sampled noise");
    oracle_flags.add_to(oracle);
    oracle_flags.flag(oracle, "problem", "problem", "heat-add | heat-mul | black-scholes | zakai");
    oracle_flags.flag(oracle, "dim", "dim", "spatial dimension d");
    oracle_flags.flag(oracle, "steps", "steps", "time steps N");
    oracle_flags.flag(oracle, "runs", "runs", "independent realizations R");
    oracle_flags.flag(oracle, "seed", "seed", "master seed");
    oracle_flags.flag(oracle, "out", "out", "output CSV (default stdout)");

    CLI::App* selftest = app.add_subcommand("selftest", "run the built-in property checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_flags);
        if (oracle->parsed()) return cmd_oracle(oracle_flags);
        if (selftest->parsed()) return cmd_selftest();
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
