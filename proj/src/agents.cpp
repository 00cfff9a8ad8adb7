#include "risshare/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "risshare/env.hpp"
#include "risshare/errors.hpp"

namespace risshare {

namespace {

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Matrix stack(const Matrix &top, const Matrix &bottom) {
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out << top, bottom;
    return out;
}

Vector row_vector(const Matrix &m) { return m.row(0).transpose(); }

Matrix as_column(std::span<const double> x) {
    return Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
}

double critic_step(Mlp &critic, Adam &opt, const Matrix &input, const Vector &target) {
    Vector grad = Vector::Zero(critic.param_count());
    const double loss = critic_loss(critic, input, target, &grad);
    opt.step(critic.params(), grad);
    return loss;
}

void check_batch(const ReplayBuffer::Batch &batch, int state_dim, int action_dim) {
    if (batch.state.rows() != state_dim) throw DimensionMismatch(state_dim, batch.state.rows());
    if (batch.action.rows() != action_dim) throw DimensionMismatch(action_dim, batch.action.rows());
    if (batch.reward.size() == 0) throw InsufficientBuffer(0, 1);
}

} // namespace

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
    if (capacity == 0) throw InvalidConfig("buffer", "capacity must be >= 1");
}

void ReplayBuffer::push(std::span<const double> state, std::span<const double> action, double reward,
                        std::span<const double> next_state, bool done) {
    if (state.size() != static_cast<std::size_t>(state_dim_)) throw DimensionMismatch(state_dim_, state.size());
    if (next_state.size() != static_cast<std::size_t>(state_dim_)) throw DimensionMismatch(state_dim_, next_state.size());
    if (action.size() != static_cast<std::size_t>(action_dim_)) throw DimensionMismatch(action_dim_, action.size());

    if (size_ < capacity_) {
        state_.insert(state_.end(), state.begin(), state.end());
        next_state_.insert(next_state_.end(), next_state.begin(), next_state.end());
        action_.insert(action_.end(), action.begin(), action.end());
        reward_.push_back(reward);
        done_.push_back(done ? 1.0 : 0.0);
        serial_.push_back(inserted_);
        ++size_;
    } else {
        std::copy(state.begin(), state.end(), state_.begin() + cursor_ * state_dim_);
        std::copy(next_state.begin(), next_state.end(), next_state_.begin() + cursor_ * state_dim_);
        std::copy(action.begin(), action.end(), action_.begin() + cursor_ * action_dim_);
        reward_[cursor_] = reward;
        done_[cursor_] = done ? 1.0 : 0.0;
        serial_[cursor_] = inserted_;
    }
    cursor_ = (cursor_ + 1) % capacity_;
    ++inserted_;

    const double delta = reward - reward_mean_;
    reward_mean_ += delta / static_cast<double>(inserted_);
    reward_m2_ += delta * (reward - reward_mean_);
}

double ReplayBuffer::reward_scale() const {
    if (inserted_ < 2) return 1.0;
    const double sd = std::sqrt(reward_m2_ / static_cast<double>(inserted_ - 1));
    return sd > 1e-8 ? sd : 1.0;
}

ReplayBuffer::Batch ReplayBuffer::sample(std::size_t n, Rng &rng) const {
    if (n == 0 || size_ < n) throw InsufficientBuffer(size_, n);
    Batch b;
    const auto cols = static_cast<Eigen::Index>(n);
    b.state.resize(state_dim_, cols);
    b.next_state.resize(state_dim_, cols);
    b.action.resize(action_dim_, cols);
    b.reward.resize(cols);
    b.done.resize(cols);
    b.serial.resize(n);
    for (Eigen::Index i = 0; i < cols; ++i) {
        const std::size_t j = rng.below(size_);
        b.state.col(i) = Eigen::Map<const Vector>(state_.data() + j * state_dim_, state_dim_);
        b.next_state.col(i) = Eigen::Map<const Vector>(next_state_.data() + j * state_dim_, state_dim_);
        b.action.col(i) = Eigen::Map<const Vector>(action_.data() + j * action_dim_, action_dim_);
        b.reward[i] = reward_[j];
        b.done[i] = done_[j];
        b.serial[i] = serial_[j];
    }
    return b;
}

// ---------------------------------------------------------------- shared math

Vector td_target(const Vector &reward, const Vector &next_q, double gamma) { return reward + gamma * next_q; }

Vector soft_target(const Vector &reward, const Vector &next_q1, const Vector &next_q2, const Vector &next_log_prob,
                   double alpha, double gamma) {
    return reward + gamma * (next_q1.cwiseMin(next_q2) - alpha * next_log_prob);
}

SquashedSample squashed_gaussian(const Matrix &head, const Matrix &noise) {
    const Eigen::Index A = head.rows() / 2;
    if (head.rows() != 2 * A || noise.rows() != A || noise.cols() != head.cols())
        throw DimensionMismatch(2 * noise.rows(), head.rows());
    SquashedSample s;
    const auto raw_log_std = head.bottomRows(A).array();
    const Eigen::ArrayXXd log_std = raw_log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    s.log_std_active = ((raw_log_std >= kLogStdMin) && (raw_log_std <= kLogStdMax)).cast<double>().matrix();
    s.std = log_std.exp().matrix();
    s.noise = noise;
    s.pre_tanh = head.topRows(A) + s.std.cwiseProduct(noise);
    s.action = s.pre_tanh.array().tanh().matrix();

    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    s.log_prob.resize(head.cols());
    for (Eigen::Index b = 0; b < head.cols(); ++b) {
        double lp = 0.0;
        for (Eigen::Index i = 0; i < A; ++i) {
            const double u = s.pre_tanh(i, b);
            // log(1 - tanh(u)^2), written to stay finite for large |u|
            const double log_jac = 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
            lp += -0.5 * noise(i, b) * noise(i, b) - log_std(i, b) - half_log_2pi - log_jac;
        }
        s.log_prob[b] = lp;
    }
    return s;
}

Matrix squashed_gaussian_backward(const SquashedSample &s, const Matrix &grad_action, const Vector &grad_log_prob) {
    const Eigen::Index A = s.action.rows();
    Matrix grad_u = grad_action.cwiseProduct((1.0 - s.action.array().square()).matrix());
    grad_u += 2.0 * s.action * grad_log_prob.asDiagonal();
    Matrix head(2 * A, s.action.cols());
    head.topRows(A) = grad_u;
    Matrix grad_log_std = grad_u.cwiseProduct(s.std).cwiseProduct(s.noise);
    grad_log_std.rowwise() -= grad_log_prob.transpose();
    head.bottomRows(A) = grad_log_std.cwiseProduct(s.log_std_active);
    return head;
}

double sac_policy_loss(const Mlp &actor, const Mlp &q1, const Mlp &q2, const Matrix &states, const Matrix &noise,
                       double alpha, Vector *actor_grad) {
    const Eigen::Index B = states.cols();
    Mlp::Cache actor_cache, c1, c2;
    const Matrix head = actor.forward(states, actor_cache);
    const SquashedSample s = squashed_gaussian(head, noise);
    const Matrix input = stack(states, s.action);
    const Vector v1 = row_vector(q1.forward(input, c1));
    const Vector v2 = row_vector(q2.forward(input, c2));
    const Vector q_min = v1.cwiseMin(v2);
    const double loss = (alpha * s.log_prob - q_min).mean();
    if (!actor_grad) return loss;

    Matrix g1 = Matrix::Zero(1, B), g2 = Matrix::Zero(1, B);
    for (Eigen::Index b = 0; b < B; ++b) (v1[b] <= v2[b] ? g1 : g2)(0, b) = -1.0 / static_cast<double>(B);
    Vector scratch1 = Vector::Zero(q1.param_count()), scratch2 = Vector::Zero(q2.param_count());
    const Matrix d_input = q1.backward(c1, g1, scratch1, true) + q2.backward(c2, g2, scratch2, true);
    const Matrix d_head = squashed_gaussian_backward(s, d_input.bottomRows(s.action.rows()),
                                                     Vector::Constant(B, alpha / static_cast<double>(B)));
    actor.backward(actor_cache, d_head, *actor_grad);
    return loss;
}

double critic_loss(const Mlp &critic, const Matrix &input, const Vector &target, Vector *grad) {
    Mlp::Cache cache;
    const Vector q = row_vector(critic.forward(input, cache));
    const Vector diff = q - target;
    const double n = static_cast<double>(target.size());
    if (grad) critic.backward(cache, (2.0 / n) * diff.transpose(), *grad);
    return diff.squaredNorm() / n;
}

double ddpg_actor_loss(const Mlp &actor, const Mlp &critic, const Matrix &states, Vector *actor_grad) {
    Mlp::Cache actor_cache, critic_cache;
    const Matrix action = actor.forward(states, actor_cache);
    const Vector q = row_vector(critic.forward(stack(states, action), critic_cache));
    if (actor_grad) {
        Vector scratch = Vector::Zero(critic.param_count());
        const Matrix d_input = critic.backward(critic_cache, Matrix::Constant(1, q.size(), -1.0 / static_cast<double>(q.size())),
                                               scratch, true);
        actor.backward(actor_cache, d_input.bottomRows(actor.output_dim()), *actor_grad);
    }
    return -q.mean();
}

// ---------------------------------------------------------------- DDPG

DdpgAgent::DdpgAgent(int state_dim, int action_dim, AgentConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      actor_(state_dim, config_.hidden, action_dim, Squash::tanh),
      critic_(state_dim + action_dim, config_.hidden, 1),
      rng_(Rng::substream(seed, {0xD1})),
      noise_(config_.noise_start) {
    Rng init = Rng::substream(seed, {0x1A});
    actor_.init(init);
    critic_.init(init);
    target_actor_ = actor_;
    target_critic_ = critic_;
    actor_opt_ = Adam(actor_.param_count(), config_.actor_lr);
    critic_opt_ = Adam(critic_.param_count(), config_.critic_lr);
}

void DdpgAgent::on_step(int step, int total_steps) {
    const double horizon = std::max(1.0, 0.5 * total_steps);
    const double frac = std::min(1.0, step / horizon);
    noise_ = config_.noise_start + (config_.noise_end - config_.noise_start) * frac;
}

std::vector<double> DdpgAgent::act(std::span<const double> state, bool explore) {
    const Vector a = actor_.forward(Vector(as_column(state)));
    std::vector<double> out(a.data(), a.data() + a.size());
    if (explore && noise_ > 0.0)
        for (double &x : out) x = std::clamp(x + noise_ * rng_.normal(), -1.0, 1.0);
    return out;
}

UpdateStats DdpgAgent::update(const ReplayBuffer::Batch &batch) {
    check_batch(batch, actor_.input_dim(), actor_.output_dim());
    const auto B = static_cast<double>(batch.reward.size());
    UpdateStats st;

    const Matrix next_action = target_actor_.forward(batch.next_state);
    const Vector next_q = row_vector(target_critic_.forward(stack(batch.next_state, next_action)));
    st.critic_loss = critic_step(critic_, critic_opt_, stack(batch.state, batch.action),
                                 td_target(batch.reward, next_q, config_.gamma));

    Vector grad = Vector::Zero(actor_.param_count());
    st.actor_loss = ddpg_actor_loss(actor_, critic_, batch.state, &grad);
    actor_opt_.step(actor_.params(), grad);

    target_actor_.soft_update_from(actor_, config_.tau);
    target_critic_.soft_update_from(critic_, config_.tau);
    return st;
}

void DdpgAgent::save(std::ostream &out) const {
    actor_.save(out);
    critic_.save(out);
    target_actor_.save(out);
    target_critic_.save(out);
    actor_opt_.save(out);
    critic_opt_.save(out);
    blob::write_f64(out, noise_);
    rng_.save(out);
}

void DdpgAgent::load(std::istream &in) {
    actor_ = Mlp::load(in);
    critic_ = Mlp::load(in);
    target_actor_ = Mlp::load(in);
    target_critic_ = Mlp::load(in);
    actor_opt_.load(in);
    critic_opt_.load(in);
    noise_ = blob::read_f64(in);
    rng_.load(in);
}

// ---------------------------------------------------------------- SAC

SacAgent::SacAgent(int state_dim, int action_dim, AgentConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      action_dim_(action_dim),
      actor_(state_dim, config_.hidden, 2 * action_dim),
      q1_(state_dim + action_dim, config_.hidden, 1),
      q2_(state_dim + action_dim, config_.hidden, 1),
      log_alpha_(Vector::Constant(1, std::log(config_.init_alpha))),
      target_entropy_(-static_cast<double>(action_dim)),
      rng_(Rng::substream(seed, {0x5AC})) {
    if (!(config_.init_alpha > 0.0)) throw InvalidConfig("init_alpha", "must be > 0");
    if (config_.policy_delay < 1) throw InvalidConfig("policy_delay", "must be >= 1");
    Rng init = Rng::substream(seed, {0x1A});
    actor_.init(init);
    q1_.init(init);
    q2_.init(init);
    target_q1_ = q1_;
    target_q2_ = q2_;
    actor_opt_ = Adam(actor_.param_count(), config_.actor_lr);
    q1_opt_ = Adam(q1_.param_count(), config_.critic_lr);
    q2_opt_ = Adam(q2_.param_count(), config_.critic_lr);
    alpha_opt_ = Adam(1, config_.alpha_lr);
}

double SacAgent::alpha() const { return std::exp(log_alpha_[0]); }

void SacAgent::set_alpha(double alpha) {
    if (!(alpha >= 0.0)) throw InvalidConfig("alpha", "must be >= 0");
    log_alpha_[0] = std::log(alpha); // -inf for 0 gives alpha() == 0 exactly
}

Matrix SacAgent::sample_noise(Eigen::Index cols) {
    Matrix n(action_dim_, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < action_dim_; ++i) n(i, j) = rng_.normal();
    return n;
}

SacAgent::Selection SacAgent::select(std::span<const double> state, bool deterministic) {
    const Matrix head = actor_.forward(Matrix(as_column(state)));
    const Matrix noise = deterministic ? Matrix::Zero(action_dim_, 1) : sample_noise(1);
    const SquashedSample s = squashed_gaussian(head, noise);
    Selection sel;
    sel.action.assign(s.action.data(), s.action.data() + s.action.size());
    sel.log_prob = s.log_prob[0];
    return sel;
}

std::vector<double> SacAgent::act(std::span<const double> state, bool explore) {
    return select(state, !explore).action;
}

UpdateStats SacAgent::update(const ReplayBuffer::Batch &batch) {
    check_batch(batch, actor_.input_dim(), action_dim_);
    const Eigen::Index B = batch.reward.size();
    const double alpha = this->alpha();
    UpdateStats st;

    const SquashedSample next = squashed_gaussian(actor_.forward(batch.next_state), sample_noise(B));
    const Matrix next_input = stack(batch.next_state, next.action);
    diag_.next_q1 = row_vector(target_q1_.forward(next_input));
    diag_.next_q2 = row_vector(target_q2_.forward(next_input));
    diag_.target = soft_target(batch.reward, diag_.next_q1, diag_.next_q2, next.log_prob, alpha, config_.gamma);

    const Matrix input = stack(batch.state, batch.action);
    st.critic_loss = 0.5 * (critic_step(q1_, q1_opt_, input, diag_.target) +
                            critic_step(q2_, q2_opt_, input, diag_.target));
    ++critic_updates_;

    if (critic_updates_ % config_.policy_delay == 0) {
        const Matrix noise = sample_noise(B);
        Vector grad = Vector::Zero(actor_.param_count());
        st.actor_loss = sac_policy_loss(actor_, q1_, q2_, batch.state, noise, alpha, &grad);
        actor_opt_.step(actor_.params(), grad);

        if (config_.learn_alpha) {
            const SquashedSample cur = squashed_gaussian(actor_.forward(batch.state), noise);
            const double excess = (cur.log_prob.array() + target_entropy_).mean();
            st.alpha_loss = -alpha * excess;
            alpha_opt_.step(log_alpha_, Vector::Constant(1, -alpha * excess));
        }
    }
    st.alpha = this->alpha();

    target_q1_.soft_update_from(q1_, config_.tau);
    target_q2_.soft_update_from(q2_, config_.tau);
    return st;
}

void SacAgent::save(std::ostream &out) const {
    actor_.save(out);
    q1_.save(out);
    q2_.save(out);
    target_q1_.save(out);
    target_q2_.save(out);
    actor_opt_.save(out);
    q1_opt_.save(out);
    q2_opt_.save(out);
    alpha_opt_.save(out);
    blob::write_f64(out, log_alpha_[0]);
    blob::write_u64(out, static_cast<std::uint64_t>(critic_updates_));
    rng_.save(out);
}

void SacAgent::load(std::istream &in) {
    actor_ = Mlp::load(in);
    q1_ = Mlp::load(in);
    q2_ = Mlp::load(in);
    target_q1_ = Mlp::load(in);
    target_q2_ = Mlp::load(in);
    actor_opt_.load(in);
    q1_opt_.load(in);
    q2_opt_.load(in);
    alpha_opt_.load(in);
    log_alpha_[0] = blob::read_f64(in);
    critic_updates_ = static_cast<std::int64_t>(blob::read_u64(in));
    rng_.load(in);
}

// ---------------------------------------------------------------- training loop

AgentKind parse_agent_kind(const std::string &name) {
    if (name == "ddpg") return AgentKind::ddpg;
    if (name == "sac") return AgentKind::sac;
    if (name == "none") return AgentKind::none;
    throw InvalidConfig("run.agent", "unknown agent '" + name + "' (expected ddpg, sac or none)");
}

std::string to_string(AgentKind kind) {
    switch (kind) {
    case AgentKind::ddpg: return "ddpg";
    case AgentKind::sac: return "sac";
    case AgentKind::none: return "none";
    }
    return "none";
}

std::unique_ptr<Agent> make_agent(AgentKind kind, int state_dim, int action_dim, const AgentConfig &config,
                                  std::uint64_t seed) {
    switch (kind) {
    case AgentKind::ddpg: return std::make_unique<DdpgAgent>(state_dim, action_dim, config, seed);
    case AgentKind::sac: return std::make_unique<SacAgent>(state_dim, action_dim, config, seed);
    case AgentKind::none: break;
    }
    throw InvalidConfig("run.agent", "training needs a learning agent");
}

std::uint64_t environment_seed(std::uint64_t run_seed) { return Rng::substream(run_seed, {0xE7}).next_u64(); }

TrainSummary train(const Scenario &scenario, const TrainConfig &config, std::uint64_t seed, const MetricsSink &sink) {
    if (config.steps < 0) throw InvalidConfig("run.steps", "must be >= 0");
    if (config.warmup < 0) throw InvalidConfig("run.warmup", "must be >= 0");
    if (config.agent.batch < 1) throw InvalidConfig("run.batch", "must be >= 1");

    Environment env(scenario, EnvConfig{config.episode_length}, environment_seed(seed));
    auto agent = make_agent(config.kind, env.state_dim(), env.action_dim(), config.agent,
                            Rng::substream(seed, {0xA6}).next_u64());
    ReplayBuffer buffer(config.agent.buffer, env.state_dim(), env.action_dim());
    Rng warm_rng = Rng::substream(seed, {0x3A});
    Rng sample_rng = Rng::substream(seed, {0x5B});
    TrainSummary summary;

    std::vector<double> state = env.reset();
    auto interact = [&](const std::vector<double> &action) {
        StepResult res = env.step(action);
        buffer.push(state, action, res.reward, res.state, res.done);
        if (res.done)
            state = env.reset();
        else
            state = res.state;
        return res;
    };

    std::vector<double> action(env.action_dim());
    for (int i = 0; i < config.warmup; ++i) {
        for (double &x : action) x = warm_rng.uniform(-1.0, 1.0);
        interact(action);
    }

    const auto batch_size = static_cast<std::size_t>(config.agent.batch);
    for (int t = 0; t < config.steps; ++t) {
        agent->on_step(t, config.steps);
        StepRecord rec;
        rec.step = t;
        rec.episode = env.episode();
        const StepResult res = interact(agent->act(state, true));
        rec.reward_raw = res.reward;
        rec.sum_utility = res.info.sum_utility;
        rec.vsp_utility = res.info.utility;
        rec.qos_penalty = res.info.qos_penalty;
        rec.sum_rate = res.info.sum_rate;

        if (buffer.size() >= batch_size) {
            for (int g = 0; g < agent->updates_per_step(); ++g) {
                auto batch = buffer.sample(batch_size, sample_rng);
                if (config.normalize_rewards) batch.reward /= buffer.reward_scale();
                const UpdateStats st = agent->update(batch);
                rec.update.critic_loss = st.critic_loss;
                if (!std::isnan(st.actor_loss)) rec.update.actor_loss = st.actor_loss;
                rec.update.alpha = st.alpha;
                ++summary.updates;
            }
        }
        if (sink) sink(rec);
    }
    summary.buffer_size = buffer.size();

    if (!config.checkpoint.empty()) {
        std::ofstream out(config.checkpoint, std::ios::binary);
        if (!out) throw Error("cannot write checkpoint " + config.checkpoint);
        blob::write_u64(out, static_cast<std::uint64_t>(config.kind == AgentKind::sac ? 2 : 1));
        agent->save(out);
        blob::write_u64(out, buffer.cursor());
        blob::write_u64(out, buffer.inserted());
        blob::write_u64(out, static_cast<std::uint64_t>(config.steps));
    }
    return summary;
}

} // namespace risshare
