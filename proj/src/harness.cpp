#include "risshare/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "risshare/env.hpp"
#include "risshare/errors.hpp"

namespace risshare {

using nlohmann::json;

namespace {

const std::set<std::string> kRunKeys{
    "agent",       "steps",      "episode_length", "seeds",          "warmup",       "gamma",
    "tau",         "batch",      "buffer",         "lr",             "actor_lr",     "critic_lr",
    "alpha_lr",    "init_alpha", "learn_alpha",    "updates_per_step", "policy_delay", "hidden",
    "noise_start", "noise_end",  "smoothing_window", "benchmark_realizations", "normalize_rewards"};

double number(const json &run, const char *key, double fallback) {
    auto it = run.find(key);
    if (it == run.end()) return fallback;
    if (!it->is_number()) throw InvalidConfig(std::string("run.") + key, "expected a number");
    return it->get<double>();
}

int integer(const json &run, const char *key, int fallback) {
    auto it = run.find(key);
    if (it == run.end()) return fallback;
    if (!it->is_number_integer()) throw InvalidConfig(std::string("run.") + key, "expected an integer");
    return it->get<int>();
}

bool boolean(const json &run, const char *key, bool fallback) {
    auto it = run.find(key);
    if (it == run.end()) return fallback;
    if (!it->is_boolean()) throw InvalidConfig(std::string("run.") + key, "expected true or false");
    return it->get<bool>();
}

std::string fmt_num(double x) {
    if (std::isnan(x)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fmt_value(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

} // namespace

// ---------------------------------------------------------------- config

RunConfig RunConfig::from_json(const json &j) {
    RunConfig c;
    c.scenario = ScenarioConfig::from_json(j);
    auto it = j.find("run");
    if (it == j.end()) return c;
    const json &run = *it;
    if (!run.is_object()) throw InvalidConfig("run", "expected an object");
    for (const auto &[key, _] : run.items())
        if (!kRunKeys.count(key)) throw InvalidConfig("run." + key, "unknown key");

    TrainConfig &t = c.train;
    AgentConfig &a = t.agent;
    if (auto ag = run.find("agent"); ag != run.end()) {
        if (!ag->is_string()) throw InvalidConfig("run.agent", "expected a string");
        t.kind = parse_agent_kind(ag->get<std::string>());
    }
    t.steps = integer(run, "steps", t.steps);
    t.warmup = integer(run, "warmup", t.warmup);
    t.episode_length = integer(run, "episode_length", t.episode_length);
    t.normalize_rewards = boolean(run, "normalize_rewards", t.normalize_rewards);
    a.gamma = number(run, "gamma", a.gamma);
    a.tau = number(run, "tau", a.tau);
    a.batch = integer(run, "batch", a.batch);
    a.buffer = static_cast<std::size_t>(integer(run, "buffer", static_cast<int>(a.buffer)));
    a.actor_lr = a.critic_lr = number(run, "lr", a.actor_lr);
    a.actor_lr = number(run, "actor_lr", a.actor_lr);
    a.critic_lr = number(run, "critic_lr", a.critic_lr);
    a.alpha_lr = number(run, "alpha_lr", a.alpha_lr);
    a.init_alpha = number(run, "init_alpha", a.init_alpha);
    a.learn_alpha = boolean(run, "learn_alpha", a.learn_alpha);
    a.updates_per_step = integer(run, "updates_per_step", a.updates_per_step);
    a.policy_delay = integer(run, "policy_delay", a.policy_delay);
    a.noise_start = number(run, "noise_start", a.noise_start);
    a.noise_end = number(run, "noise_end", a.noise_end);
    if (auto h = run.find("hidden"); h != run.end()) {
        if (!h->is_array() || h->empty()) throw InvalidConfig("run.hidden", "expected a non-empty list of widths");
        a.hidden.clear();
        for (const auto &w : *h) {
            if (!w.is_number_integer()) throw InvalidConfig("run.hidden", "expected integers");
            a.hidden.push_back(w.get<int>());
        }
    }
    if (auto s = run.find("seeds"); s != run.end()) {
        if (!s->is_array()) throw InvalidConfig("run.seeds", "expected a list of integers");
        c.seeds.clear();
        for (const auto &x : *s) {
            if (!x.is_number_integer()) throw InvalidConfig("run.seeds", "expected a list of integers");
            c.seeds.push_back(x.get<std::uint64_t>());
        }
    }
    c.smoothing_window = integer(run, "smoothing_window", c.smoothing_window);
    c.benchmark_realizations = integer(run, "benchmark_realizations", c.benchmark_realizations);

    if (t.steps < 1) throw InvalidConfig("run.steps", "must be >= 1");
    if (t.warmup < 0) throw InvalidConfig("run.warmup", "must be >= 0");
    if (t.episode_length < 1) throw InvalidConfig("run.episode_length", "must be >= 1");
    if (c.seeds.empty()) throw InvalidConfig("run.seeds", "must not be empty");
    if (!(a.gamma >= 0.0 && a.gamma <= 1.0)) throw InvalidConfig("run.gamma", "must lie in [0, 1]");
    if (!(a.tau > 0.0 && a.tau <= 1.0)) throw InvalidConfig("run.tau", "must lie in (0, 1]");
    if (a.batch < 1) throw InvalidConfig("run.batch", "must be >= 1");
    if (a.buffer < static_cast<std::size_t>(a.batch)) throw InvalidConfig("run.buffer", "must hold at least one batch");
    for (double lr : {a.actor_lr, a.critic_lr, a.alpha_lr})
        if (!(lr > 0.0 && lr < 1.0)) throw InvalidConfig("run.lr", "learning rates must lie in (0, 1)");
    if (!(a.init_alpha > 0.0)) throw InvalidConfig("run.init_alpha", "must be > 0");
    if (a.updates_per_step < 0) throw InvalidConfig("run.updates_per_step", "must be >= 0");
    if (a.policy_delay < 1) throw InvalidConfig("run.policy_delay", "must be >= 1");
    for (int w : a.hidden)
        if (w < 1) throw InvalidConfig("run.hidden", "widths must be >= 1");
    if (c.smoothing_window < 1) throw InvalidConfig("run.smoothing_window", "must be >= 1");
    if (c.benchmark_realizations < 1) throw InvalidConfig("run.benchmark_realizations", "must be >= 1");
    return c;
}

json RunConfig::to_json() const {
    json j = scenario.to_json();
    const AgentConfig &a = train.agent;
    j["run"] = {{"agent", to_string(train.kind)},
                {"steps", train.steps},
                {"warmup", train.warmup},
                {"episode_length", train.episode_length},
                {"normalize_rewards", train.normalize_rewards},
                {"seeds", seeds},
                {"gamma", a.gamma},
                {"tau", a.tau},
                {"batch", a.batch},
                {"buffer", a.buffer},
                {"actor_lr", a.actor_lr},
                {"critic_lr", a.critic_lr},
                {"alpha_lr", a.alpha_lr},
                {"init_alpha", a.init_alpha},
                {"learn_alpha", a.learn_alpha},
                {"updates_per_step", a.updates_per_step},
                {"policy_delay", a.policy_delay},
                {"noise_start", a.noise_start},
                {"noise_end", a.noise_end},
                {"hidden", a.hidden},
                {"smoothing_window", smoothing_window},
                {"benchmark_realizations", benchmark_realizations}};
    return j;
}

void apply_override(json &config, const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidConfig(assignment, "override must look like key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json *node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw InvalidConfig(key, "empty path component");
        if (!node->is_object()) throw InvalidConfig(key, "path crosses a non-object value");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

json load_json_file(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig(path.string(), "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error &e) {
        throw InvalidConfig(path.string(), e.what());
    }
}

Scenario scenario_for_seed(const ScenarioConfig &config, std::uint64_t run_seed) {
    ScenarioConfig c = config;
    c.seed = Rng::substream(config.seed, {0x6E0, run_seed}).next_u64();
    return build_scenario(c);
}

// ---------------------------------------------------------------- runs

std::vector<double> moving_average(const std::vector<double> &x, int window) {
    std::vector<double> out(x.size());
    // Each window summed directly, so values do not drift with accumulated rounding.
    for (std::size_t t = 0; t < x.size(); ++t) {
        const std::size_t lo = t + 1 >= static_cast<std::size_t>(window) ? t + 1 - window : 0;
        double s = 0.0;
        for (std::size_t i = lo; i <= t; ++i) s += x[i];
        out[t] = s / static_cast<double>(t + 1 - lo);
    }
    return out;
}

RunResult run_training(const RunConfig &config, std::uint64_t seed) {
    const Scenario scenario = scenario_for_seed(config.scenario, seed);
    RunResult res;
    res.seed = seed;
    res.records.reserve(config.train.steps);
    const auto start = std::chrono::steady_clock::now();
    train(scenario, config.train, seed, [&](const StepRecord &r) { res.records.push_back(r); });
    res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::vector<double> raw;
    raw.reserve(res.records.size());
    for (const auto &r : res.records) raw.push_back(r.reward_raw);
    res.smoothed = moving_average(raw, config.smoothing_window);
    res.final_smoothed = res.smoothed.empty() ? 0.0 : res.smoothed.back();
    return res;
}

std::string metrics_header(int num_vsps) {
    std::string h = "step,episode,reward_raw,reward_smoothed,sum_utility";
    for (int v = 0; v < num_vsps; ++v) h += ",utility_vsp" + std::to_string(v);
    h += ",qos_penalty,sum_rate,critic_loss,actor_loss,alpha";
    return h;
}

void write_metrics_csv(const fs::path &path, const RunResult &run, int num_vsps) {
    std::string text = metrics_header(num_vsps) + "\n";
    for (std::size_t i = 0; i < run.records.size(); ++i) {
        const StepRecord &r = run.records[i];
        text += std::to_string(r.step) + "," + std::to_string(r.episode) + "," + fmt_num(r.reward_raw) + "," +
                fmt_num(run.smoothed[i]) + "," + fmt_num(r.sum_utility);
        for (int v = 0; v < num_vsps; ++v) text += "," + fmt_num(r.vsp_utility.at(v));
        text += "," + fmt_num(r.qos_penalty) + "," + fmt_num(r.sum_rate) + "," + fmt_num(r.update.critic_loss) + "," +
                fmt_num(r.update.actor_loss) + "," + fmt_num(r.update.alpha) + "\n";
    }
    write_text(path, text);
}

int MetricsTable::column(const std::string &name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<double> MetricsTable::values(const std::string &name) const {
    const int c = column(name);
    if (c < 0) throw SchemaMismatch("missing column '" + name + "'");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto &r : rows) out.push_back(r[c]);
    return out;
}

MetricsTable read_metrics_csv(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    MetricsTable t;
    std::string line;
    if (!std::getline(in, line)) throw EmptyInput(path.string() + " is empty");
    t.header = split_csv_line(line);
    if (t.header.empty() || t.header[0] != "step") throw SchemaMismatch(path.string() + ": first column must be 'step'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != t.header.size())
            throw SchemaMismatch(path.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                                 std::to_string(t.header.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto &c : cells) row.push_back(c.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(c));
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_aggregate_csv(const fs::path &path, const std::vector<RunResult> &runs) {
    if (runs.empty()) throw EmptyInput("no runs to aggregate");
    const std::size_t steps = runs.front().records.size();
    for (const auto &r : runs)
        if (r.records.size() != steps) throw SchemaMismatch("runs differ in length");
    std::string text =
        "step,reward_raw_median,reward_smoothed_median,reward_smoothed_mean,sum_utility_median,sum_rate_median,seeds\n";
    std::vector<double> raw(runs.size()), smooth(runs.size()), util(runs.size()), rate(runs.size());
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < runs.size(); ++i) {
            raw[i] = runs[i].records[t].reward_raw;
            smooth[i] = runs[i].smoothed[t];
            util[i] = runs[i].records[t].sum_utility;
            rate[i] = runs[i].records[t].sum_rate;
        }
        text += std::to_string(runs.front().records[t].step) + "," + fmt_num(median(raw)) + "," +
                fmt_num(median(smooth)) + "," + fmt_num(mean(smooth)) + "," + fmt_num(median(util)) + "," +
                fmt_num(median(rate)) + "," + std::to_string(runs.size()) + "\n";
    }
    write_text(path, text);
}

void run_parallel(std::size_t tasks, int jobs, const std::function<void(std::size_t)> &task) {
    const std::size_t workers = std::min<std::size_t>(tasks, static_cast<std::size_t>(std::max(1, jobs)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto drain = [&] {
        for (std::size_t i = next++; i < tasks; i = next++) {
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        drain();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(drain);
        for (auto &t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

TrainReport cmd_train(const RunConfig &config, const fs::path &out, int jobs) {
    if (config.train.kind == AgentKind::none) throw InvalidConfig("run.agent", "train needs ddpg or sac");
    fs::create_directories(out);
    std::vector<RunResult> runs(config.seeds.size());
    run_parallel(runs.size(), jobs, [&](std::size_t i) { runs[i] = run_training(config, config.seeds[i]); });

    TrainReport report;
    json summary = {{"agent", to_string(config.train.kind)}, {"steps", config.train.steps}, {"runs", json::array()}};
    for (const auto &run : runs) {
        const std::string tag = "seed" + std::to_string(run.seed);
        const fs::path csv = out / ("metrics_" + tag + ".csv");
        write_metrics_csv(csv, run, config.scenario.vsps);
        json side = {{"seed", run.seed}, {"wall_ms", run.wall_ms}, {"final_smoothed", run.final_smoothed}};
        write_text(out / ("run_" + tag + ".json"), side.dump(2) + "\n");
        report.metrics.push_back(csv);
        report.final_smoothed.push_back(run.final_smoothed);
        summary["runs"].push_back({{"seed", run.seed}, {"metrics", csv.filename().string()},
                                   {"final_smoothed", run.final_smoothed}});
    }
    report.aggregate = out / "aggregate.csv";
    write_aggregate_csv(report.aggregate, runs);
    report.median_final = median(report.final_smoothed);
    summary["median_final_smoothed"] = report.median_final;
    write_text(out / "summary.json", summary.dump(2) + "\n");
    write_text(out / "config.json", config.to_json().dump(2) + "\n");
    return report;
}

// ---------------------------------------------------------------- benchmark

int benchmark_realization_count(const RunConfig &config) {
    const TrainConfig &t = config.train;
    const int episodes = (t.warmup + t.steps + t.episode_length - 1) / t.episode_length;
    return std::max(1, std::min(config.benchmark_realizations, episodes));
}

BenchmarkSeed benchmark_seed(const RunConfig &config, std::uint64_t seed) {
    const Scenario s = scenario_for_seed(config.scenario, seed);
    const RisAssociation assoc = fix_ris_association(s);
    // Same channel draws as the training environment, one per episode.
    Environment env(s, EnvConfig{config.train.episode_length}, environment_seed(seed));
    BenchmarkSeed out;
    out.seed = seed;
    const int count = benchmark_realization_count(config);
    double sum = 0.0;
    for (int r = 0; r < count; ++r) {
        env.reset();
        out.realizations.push_back(eds_solve(s, env.channels(), assoc));
        sum += out.realizations.back().reward;
    }
    out.mean_reward = sum / static_cast<double>(count);
    return out;
}

BenchmarkReport cmd_benchmark(const RunConfig &config, const fs::path &out, int jobs) {
    fs::create_directories(out);
    BenchmarkReport report;
    report.seeds.resize(config.seeds.size());
    run_parallel(config.seeds.size(), jobs,
                 [&](std::size_t i) { report.seeds[i] = benchmark_seed(config, config.seeds[i]); });

    json seeds = json::array();
    std::string csv = "seed,realization,config_id,stage1_reward,stage2_reward,sum_rate,iterations,infeasible_qos\n";
    double sum = 0.0;
    for (const auto &bs : report.seeds) {
        const Scenario s = scenario_for_seed(config.scenario, bs.seed);
        json reals = json::array();
        for (std::size_t r = 0; r < bs.realizations.size(); ++r) {
            const EdsResult &e = bs.realizations[r];
            reals.push_back(to_json(e, s));
            csv += std::to_string(bs.seed) + "," + std::to_string(r) + "," + std::to_string(e.config_id) + "," +
                   fmt_num(e.stage1_reward) + "," + fmt_num(e.reward) + "," + fmt_num(e.breakdown.sum_rate) + "," +
                   std::to_string(e.iterations) + "," + (e.infeasible_qos ? "1" : "0") + "\n";
        }
        seeds.push_back({{"seed", bs.seed}, {"mean_reward", bs.mean_reward}, {"realizations", reals}});
        sum += bs.mean_reward;
    }
    report.mean_reward = sum / static_cast<double>(report.seeds.size());
    const json record = {{"scenario", config.scenario.to_json()}, {"seeds", seeds}, {"mean_reward", report.mean_reward}};
    report.record = out / "benchmark.json";
    write_text(report.record, record.dump(2) + "\n");
    write_text(out / "benchmark.csv", csv);
    return report;
}

// ---------------------------------------------------------------- sweep

SweepAxis parse_sweep_axis(const std::string &name) {
    if (name == "lr") return SweepAxis::lr;
    if (name == "batch") return SweepAxis::batch;
    throw InvalidConfig("axis", "expected 'lr' or 'batch', got '" + name + "'");
}

double SweepReport::spread(AgentKind agent) const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto &p : points)
        if (p.agent == agent) {
            lo = std::min(lo, p.median_final);
            hi = std::max(hi, p.median_final);
        }
    return hi >= lo ? hi - lo : std::numeric_limits<double>::quiet_NaN();
}

double SweepReport::relative_spread(AgentKind agent) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto &p : points)
        if (p.agent == agent) best = std::max(best, p.median_final);
    return spread(agent) / std::abs(best);
}

SweepReport cmd_sweep(const RunConfig &base, SweepAxis axis, const std::vector<double> &values, const fs::path &out,
                      int jobs) {
    if (values.empty()) throw InvalidConfig("values", "sweep needs at least one value");
    fs::create_directories(out);
    SweepReport report;
    report.axis = axis;
    const char *axis_name = axis == SweepAxis::lr ? "lr" : "batch";
    json points = json::array();
    std::string csv = "agent,axis,value,median_final_smoothed\n";
    for (AgentKind agent : {AgentKind::ddpg, AgentKind::sac}) {
        for (double value : values) {
            RunConfig cfg = base;
            cfg.train.kind = agent;
            if (axis == SweepAxis::lr) {
                if (!(value > 0.0 && value < 1.0)) throw InvalidConfig("values", "learning rates must lie in (0, 1)");
                cfg.train.agent.actor_lr = cfg.train.agent.critic_lr = value;
            } else {
                if (value < 1 || value != std::floor(value)) throw InvalidConfig("values", "batch sizes must be integers >= 1");
                cfg.train.agent.batch = static_cast<int>(value);
            }
            const std::string name = to_string(agent) + "_" + axis_name + "_" + fmt_value(value);
            const TrainReport tr = cmd_train(cfg, out / name, jobs);
            SweepPoint p{agent, value, tr.final_smoothed, tr.median_final};
            points.push_back({{"agent", to_string(agent)}, {"value", value}, {"dir", name},
                              {"final_smoothed", p.final_smoothed}, {"median_final_smoothed", p.median_final}});
            csv += to_string(agent) + "," + axis_name + "," + fmt_num(value) + "," + fmt_num(p.median_final) + "\n";
            report.points.push_back(std::move(p));
        }
    }
    json summary = json::object();
    for (AgentKind agent : {AgentKind::ddpg, AgentKind::sac})
        summary[to_string(agent)] = {{"spread", report.spread(agent)},
                                     {"relative_spread", report.relative_spread(agent)}};
    report.record = out / "sweep.json";
    write_text(report.record,
               json({{"axis", axis_name}, {"values", values}, {"points", points}, {"summary", summary}}).dump(2) + "\n");
    write_text(out / "sweep.csv", csv);
    return report;
}

} // namespace risshare
