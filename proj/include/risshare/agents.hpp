#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "risshare/nn.hpp"
#include "risshare/rng.hpp"
#include "risshare/topology.hpp"

namespace risshare {

// Uniform-replay ring buffer. Storage grows on demand up to `capacity`, then the
// oldest slot is overwritten.
class ReplayBuffer {
public:
    struct Batch {
        Matrix state, action, next_state; // one transition per column
        Vector reward, done;
        std::vector<std::uint64_t> serial; // insertion number of each sampled transition
    };

    ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

    void push(std::span<const double> state, std::span<const double> action, double reward,
              std::span<const double> next_state, bool done);
    Batch sample(std::size_t n, Rng &rng) const;

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t cursor() const { return cursor_; }
    std::uint64_t inserted() const { return inserted_; }

    // Running standard deviation of every reward pushed so far (1 until two samples exist).
    double reward_scale() const;

private:
    std::size_t capacity_;
    int state_dim_, action_dim_;
    std::size_t size_ = 0, cursor_ = 0;
    std::uint64_t inserted_ = 0;
    std::vector<double> state_, action_, next_state_, reward_, done_;
    std::vector<std::uint64_t> serial_;
    double reward_mean_ = 0.0, reward_m2_ = 0.0;
};

struct AgentConfig {
    std::vector<int> hidden{256, 256};
    double gamma = 0.99;
    double tau = 5e-3;
    double actor_lr = 1e-4;
    double critic_lr = 1e-4;
    double alpha_lr = 3e-4;
    double init_alpha = 0.05;
    bool learn_alpha = true;
    int batch = 256;
    std::size_t buffer = 200000;
    int updates_per_step = 0; // 0: agent default (DDPG 1, SAC 2)
    int policy_delay = 2;
    double noise_start = 0.3;
    double noise_end = 0.05;
};

struct UpdateStats {
    double critic_loss = std::numeric_limits<double>::quiet_NaN();
    double actor_loss = std::numeric_limits<double>::quiet_NaN();
    double alpha_loss = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
};

// Bootstrapped targets. Time-limit ends are not terminal, so there is no done mask.
Vector td_target(const Vector &reward, const Vector &next_q, double gamma);
Vector soft_target(const Vector &reward, const Vector &next_q1, const Vector &next_q2, const Vector &next_log_prob,
                   double alpha, double gamma);

// tanh-squashed diagonal Gaussian. `head` rows are [mean; log_std] per sample;
// log_std is clamped to [-20, 2].
struct SquashedSample {
    Matrix action;   // tanh(u)
    Vector log_prob; // includes the change-of-variables term
    Matrix pre_tanh; // u = mean + std * noise
    Matrix std;
    Matrix noise;
    Matrix log_std_active; // 1 where the clamp did not bind
};

SquashedSample squashed_gaussian(const Matrix &head, const Matrix &noise);

// dL/dhead from dL/daction and dL/dlog_prob.
Matrix squashed_gaussian_backward(const SquashedSample &sample, const Matrix &grad_action, const Vector &grad_log_prob);

// Mean squared error of a scalar critic against `target`. Adds d/dparams into `grad` when non-null.
double critic_loss(const Mlp &critic, const Matrix &input, const Vector &target, Vector *grad);

// -mean_b Q(s, actor(s)). Adds d/dactor into `actor_grad` when non-null.
double ddpg_actor_loss(const Mlp &actor, const Mlp &critic, const Matrix &states, Vector *actor_grad);

// mean_b[alpha * log_prob - min(Q1, Q2)] at actions re-sampled with `noise`.
// Adds d/dactor into `actor_grad` when non-null.
double sac_policy_loss(const Mlp &actor, const Mlp &q1, const Mlp &q2, const Matrix &states, const Matrix &noise,
                       double alpha, Vector *actor_grad);

class Agent {
public:
    virtual ~Agent() = default;

    virtual std::vector<double> act(std::span<const double> state, bool explore) = 0;
    virtual UpdateStats update(const ReplayBuffer::Batch &batch) = 0;
    virtual int updates_per_step() const = 0;
    // Called once per post-warm-up environment step before acting.
    virtual void on_step(int /*step*/, int /*total_steps*/) {}

    virtual void save(std::ostream &out) const = 0;
    virtual void load(std::istream &in) = 0;
};

class DdpgAgent : public Agent {
public:
    DdpgAgent(int state_dim, int action_dim, AgentConfig config, std::uint64_t seed);

    std::vector<double> act(std::span<const double> state, bool explore) override;
    UpdateStats update(const ReplayBuffer::Batch &batch) override;
    int updates_per_step() const override { return config_.updates_per_step > 0 ? config_.updates_per_step : 1; }
    // Linear anneal from noise_start to noise_end over the first half of training.
    void on_step(int step, int total_steps) override;

    void save(std::ostream &out) const override;
    void load(std::istream &in) override;

    double noise() const { return noise_; }
    void set_noise(double sigma) { noise_ = sigma; }

    Mlp &actor() { return actor_; }
    Mlp &critic() { return critic_; }
    const Mlp &target_actor() const { return target_actor_; }
    const Mlp &target_critic() const { return target_critic_; }
    const AgentConfig &config() const { return config_; }

private:
    AgentConfig config_;
    Mlp actor_, critic_, target_actor_, target_critic_;
    Adam actor_opt_, critic_opt_;
    Rng rng_;
    double noise_;
};

class SacAgent : public Agent {
public:
    struct Selection {
        std::vector<double> action;
        double log_prob = 0.0;
    };

    // Values of the last critic update, kept for instrumentation.
    struct Diagnostics {
        Vector next_q1, next_q2, target;
    };

    SacAgent(int state_dim, int action_dim, AgentConfig config, std::uint64_t seed);

    Selection select(std::span<const double> state, bool deterministic);
    std::vector<double> act(std::span<const double> state, bool explore) override;
    UpdateStats update(const ReplayBuffer::Batch &batch) override;
    int updates_per_step() const override { return config_.updates_per_step > 0 ? config_.updates_per_step : 2; }

    void save(std::ostream &out) const override;
    void load(std::istream &in) override;

    double alpha() const;
    void set_alpha(double alpha);
    double target_entropy() const { return target_entropy_; }

    Mlp &actor() { return actor_; }
    Mlp &q1() { return q1_; }
    Mlp &q2() { return q2_; }
    const Mlp &target_q1() const { return target_q1_; }
    const Mlp &target_q2() const { return target_q2_; }
    const Diagnostics &diagnostics() const { return diag_; }
    std::int64_t critic_updates() const { return critic_updates_; }

private:
    Matrix sample_noise(Eigen::Index cols);

    AgentConfig config_;
    int action_dim_;
    Mlp actor_, q1_, q2_, target_q1_, target_q2_;
    Adam actor_opt_, q1_opt_, q2_opt_, alpha_opt_;
    Vector log_alpha_;
    double target_entropy_;
    Rng rng_;
    std::int64_t critic_updates_ = 0;
    Diagnostics diag_;
};

enum class AgentKind { ddpg, sac, none };

AgentKind parse_agent_kind(const std::string &name);
std::string to_string(AgentKind kind);

std::unique_ptr<Agent> make_agent(AgentKind kind, int state_dim, int action_dim, const AgentConfig &config,
                                  std::uint64_t seed);

struct TrainConfig {
    AgentKind kind = AgentKind::sac;
    int steps = 20000; // post-warm-up interaction steps T
    int warmup = 1000;
    int episode_length = 100;
    bool normalize_rewards = true;
    AgentConfig agent;
    std::string checkpoint; // written after the last step when non-empty
};

struct StepRecord {
    int step = 0;
    int episode = 0;
    double reward_raw = 0.0;
    double sum_utility = 0.0;
    std::vector<double> vsp_utility;
    double qos_penalty = 0.0;
    double sum_rate = 0.0;
    UpdateStats update; // last update of this step, NaN when none ran
};

struct TrainSummary {
    std::int64_t updates = 0;
    std::size_t buffer_size = 0;
};

using MetricsSink = std::function<void(const StepRecord &)>;

// Seed of the environment a training run steps through.
std::uint64_t environment_seed(std::uint64_t run_seed);

TrainSummary train(const Scenario &scenario, const TrainConfig &config, std::uint64_t seed, const MetricsSink &sink);

} // namespace risshare
