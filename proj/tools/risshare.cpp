#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "risshare/errors.hpp"
#include "risshare/harness.hpp"

using namespace risshare;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

std::vector<std::uint64_t> parse_seeds(const std::string &text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(part, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        if (part.empty() || used != part.size()) throw InvalidConfig("--seeds", "expected comma-separated integers");
        seeds.push_back(v);
    }
    if (seeds.empty()) throw InvalidConfig("--seeds", "no seeds given");
    return seeds;
}

std::vector<double> parse_values(const std::string &text) {
    std::vector<double> values;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(part, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        if (part.empty() || used != part.size()) throw InvalidConfig("--values", "expected comma-separated numbers");
        values.push_back(v);
    }
    return values;
}

struct Common {
    std::string config;
    std::string seeds;
    std::string out = "out";
    std::vector<std::string> overrides;
    int jobs = 1;

    void attach(CLI::App *cmd, bool needs_config = true) {
        auto *opt = cmd->add_option("--config", config, "scenario and run configuration (JSON)");
        if (needs_config) opt->required();
        cmd->add_option("--seeds", seeds, "comma-separated run seeds, replacing run.seeds");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--override", overrides, "dotted key=value applied to the config, repeatable");
        cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    }

    RunConfig load() const {
        nlohmann::json j = config.empty() ? nlohmann::json::object() : load_json_file(config);
        for (const auto &o : overrides) apply_override(j, o);
        RunConfig rc = RunConfig::from_json(j);
        if (!seeds.empty()) rc.seeds = parse_seeds(seeds);
        return rc;
    }
};

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Multi-tenant RIS spectrum sharing: DRL training, benchmark and plots"};
    app.require_subcommand(1);

    Common train_opts, bench_opts, sweep_opts, check_opts;
    auto *train_cmd = app.add_subcommand("train", "train an agent over one or more seeds");
    train_opts.attach(train_cmd);

    auto *bench_cmd = app.add_subcommand("benchmark", "solve the exhaustive-search benchmark per seed");
    bench_opts.attach(bench_cmd);

    auto *sweep_cmd = app.add_subcommand("sweep", "train both agents across a hyperparameter axis");
    sweep_opts.attach(sweep_cmd);
    std::string axis, values;
    sweep_cmd->add_option("--axis", axis, "lr or batch")->required();
    sweep_cmd->add_option("--values", values, "comma-separated values")->required();

    auto *check_cmd = app.add_subcommand("validate-config", "parse a config and build every seed's scenario");
    check_opts.attach(check_cmd);

    auto *plot_cmd = app.add_subcommand("plot", "render SVG figures from metrics files");
    std::vector<std::string> inputs, benchmarks;
    std::string style = "curves", plot_out = "plot.svg";
    plot_cmd->add_option("inputs", inputs, "metrics CSVs, or sweep.json files for --style sweep")->required();
    plot_cmd->add_option("--style", style, "curves, bars or sweep");
    plot_cmd->add_option("--benchmark", benchmarks, "benchmark.json reference lines for curves");
    plot_cmd->add_option("--out", plot_out, "output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (train_cmd->parsed()) {
            const RunConfig rc = train_opts.load();
            const TrainReport r = cmd_train(rc, train_opts.out, train_opts.jobs);
            for (std::size_t i = 0; i < rc.seeds.size(); ++i)
                std::printf("seed %llu final smoothed reward %.4f\n", static_cast<unsigned long long>(rc.seeds[i]),
                            r.final_smoothed[i]);
            std::printf("median %.4f\n", r.median_final);
        } else if (bench_cmd->parsed()) {
            const RunConfig rc = bench_opts.load();
            const BenchmarkReport r = cmd_benchmark(rc, bench_opts.out, bench_opts.jobs);
            for (const auto &s : r.seeds)
                std::printf("seed %llu mean reward %.4f\n", static_cast<unsigned long long>(s.seed), s.mean_reward);
            std::printf("mean %.4f\n", r.mean_reward);
        } else if (sweep_cmd->parsed()) {
            const RunConfig rc = sweep_opts.load();
            const SweepAxis ax = parse_sweep_axis(axis);
            const SweepReport r = cmd_sweep(rc, ax, parse_values(values), sweep_opts.out, sweep_opts.jobs);
            for (AgentKind a : {AgentKind::ddpg, AgentKind::sac})
                std::printf("%s spread %.4f relative %.4f\n", to_string(a).c_str(), r.spread(a), r.relative_spread(a));
        } else if (check_cmd->parsed()) {
            const RunConfig rc = check_opts.load();
            for (auto seed : rc.seeds) validate_scenario(scenario_for_seed(rc.scenario, seed));
            std::cout << rc.to_json().dump(2) << "\n";
        } else if (plot_cmd->parsed()) {
            std::vector<fs::path> in(inputs.begin(), inputs.end()), bench(benchmarks.begin(), benchmarks.end());
            std::printf("%s\n", cmd_plot(in, parse_plot_style(style), plot_out, bench).string().c_str());
        }
    } catch (const InvalidConfig &e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const OverlappingSets &e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const DegenerateGeometry &e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const NoRis &e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntimeError;
    }
    return 0;
}
