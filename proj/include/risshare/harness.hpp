#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "risshare/agents.hpp"
#include "risshare/benchmark.hpp"
#include "risshare/topology.hpp"

namespace risshare {

namespace fs = std::filesystem;

struct RunConfig {
    ScenarioConfig scenario;
    TrainConfig train;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    int smoothing_window = 500;
    int benchmark_realizations = 10;

    // Scenario keys at the top level plus a `run` block.
    static RunConfig from_json(const nlohmann::json &j);
    nlohmann::json to_json() const;
};

// Sets a dotted key to a value parsed as JSON, or as a plain string when it is not valid JSON.
void apply_override(nlohmann::json &config, const std::string &assignment);

nlohmann::json load_json_file(const fs::path &path);

// Geometry for one run: the configured seed mixed with the run seed.
Scenario scenario_for_seed(const ScenarioConfig &config, std::uint64_t run_seed);

struct RunResult {
    std::uint64_t seed = 0;
    std::vector<StepRecord> records;
    std::vector<double> smoothed;
    double final_smoothed = 0.0;
    double wall_ms = 0.0;
};

// Trailing mean over (t - window, t].
std::vector<double> moving_average(const std::vector<double> &x, int window);

RunResult run_training(const RunConfig &config, std::uint64_t seed);

std::string metrics_header(int num_vsps);
void write_metrics_csv(const fs::path &path, const RunResult &run, int num_vsps);

struct MetricsTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows; // NaN for empty cells

    int column(const std::string &name) const; // -1 when absent
    std::vector<double> values(const std::string &name) const;
};

MetricsTable read_metrics_csv(const fs::path &path);

// Per-step median (and mean) of the smoothed and raw rewards across runs.
void write_aggregate_csv(const fs::path &path, const std::vector<RunResult> &runs);

// Runs `tasks` on up to `jobs` threads; the first exception is rethrown after all finish.
void run_parallel(std::size_t tasks, int jobs, const std::function<void(std::size_t)> &task);

struct TrainReport {
    std::vector<fs::path> metrics;
    fs::path aggregate;
    std::vector<double> final_smoothed; // per seed, in seed order
    double median_final = 0.0;
};

TrainReport cmd_train(const RunConfig &config, const fs::path &out, int jobs);

struct BenchmarkSeed {
    std::uint64_t seed;
    std::vector<EdsResult> realizations;
    double mean_reward = 0.0;
};

struct BenchmarkReport {
    std::vector<BenchmarkSeed> seeds;
    double mean_reward = 0.0;
    fs::path record;
};

// Episodes whose channels the benchmark solves: the first few of the training run.
int benchmark_realization_count(const RunConfig &config);
BenchmarkSeed benchmark_seed(const RunConfig &config, std::uint64_t seed);
BenchmarkReport cmd_benchmark(const RunConfig &config, const fs::path &out, int jobs);

enum class SweepAxis { lr, batch };
SweepAxis parse_sweep_axis(const std::string &name);

struct SweepPoint {
    AgentKind agent;
    double value;
    std::vector<double> final_smoothed; // per seed
    double median_final = 0.0;
};

struct SweepReport {
    SweepAxis axis;
    std::vector<SweepPoint> points;
    // Per agent: max - min of the per-value medians, and that spread divided by |best|.
    double spread(AgentKind agent) const;
    double relative_spread(AgentKind agent) const;
    fs::path record;
};

SweepReport cmd_sweep(const RunConfig &base, SweepAxis axis, const std::vector<double> &values, const fs::path &out,
                      int jobs);

enum class PlotStyle { curves, bars, sweep };
PlotStyle parse_plot_style(const std::string &name);

// Writes one SVG and returns its path. Curves and bars take metrics CSVs (per seed
// or aggregate); sweep takes sweep report JSON files. `benchmark` adds horizontal
// reference lines to curve plots.
fs::path cmd_plot(const std::vector<fs::path> &inputs, PlotStyle style, const fs::path &out,
                  const std::vector<fs::path> &benchmarks = {});

} // namespace risshare
