#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "risshare/agents.hpp"
#include "risshare/errors.hpp"
#include "support.hpp"

using namespace risshare;
using namespace testing;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng &rng) {
    Matrix m(rows, cols);
    for (auto &x : m.reshaped()) x = rng.normal();
    return m;
}

Vector finite_difference(Vector params, const std::function<double(const Vector &)> &f, double h = 1e-5) {
    Vector g(params.size());
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = f(params);
        params[i] = keep - h;
        const double down = f(params);
        params[i] = keep;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

double max_rel_error(const Vector &a, const Vector &b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1e-8, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
}

AgentConfig small_config() {
    AgentConfig c;
    c.hidden = {32, 32};
    c.batch = 32;
    c.buffer = 10000;
    return c;
}

ReplayBuffer::Batch constant_batch(int n, int state_dim, int action_dim, double reward, Rng &rng) {
    ReplayBuffer::Batch b;
    const Matrix s = random_matrix(state_dim, 1, rng);
    const Matrix a = random_matrix(action_dim, 1, rng).array().tanh().matrix();
    b.state = s.replicate(1, n);
    b.next_state = b.state;
    b.action = a.replicate(1, n);
    b.reward = Vector::Constant(n, reward);
    b.done = Vector::Zero(n);
    return b;
}

} // namespace

TEST_SUITE("replay") {

TEST_CASE("grows, then overwrites the oldest slot") {
    ReplayBuffer buf(3, 1, 1);
    for (int i = 0; i < 5; ++i) {
        const double x = i;
        buf.push(std::span(&x, 1), std::span(&x, 1), x, std::span(&x, 1), false);
        CHECK(buf.size() == static_cast<std::size_t>(std::min(i + 1, 3)));
    }
    CHECK(buf.inserted() == 5);
    CHECK(buf.cursor() == 2);
    Rng rng(1);
    for (int draw = 0; draw < 100; ++draw) {
        const auto batch = buf.sample(3, rng);
        for (Eigen::Index i = 0; i < batch.reward.size(); ++i) {
            CHECK(batch.reward[i] >= 2.0); // transitions 0 and 1 are gone
            CHECK(batch.state(0, i) == static_cast<double>(batch.serial[i]));
        }
    }
}

TEST_CASE("sampling more than stored throws") {
    ReplayBuffer buf(10, 2, 1);
    Rng rng(1);
    CHECK_THROWS_AS(buf.sample(1, rng), InsufficientBuffer);
}

TEST_CASE("dimension checks") {
    ReplayBuffer buf(10, 2, 1);
    const std::vector<double> s(3), a(1);
    CHECK_THROWS_AS(buf.push(s, a, 0.0, s, false), DimensionMismatch);
}

TEST_CASE("reward scale is the running standard deviation") {
    ReplayBuffer buf(4, 1, 1);
    CHECK(buf.reward_scale() == 1.0);
    const std::vector<double> rewards{1, 4, -2, 7, 3, 3};
    const double z = 0;
    for (double r : rewards) buf.push(std::span(&z, 1), std::span(&z, 1), r, std::span(&z, 1), false);
    double mean = 0, m2 = 0;
    for (double r : rewards) mean += r / rewards.size();
    for (double r : rewards) m2 += (r - mean) * (r - mean);
    CHECK(buf.reward_scale() == doctest::Approx(std::sqrt(m2 / (rewards.size() - 1))));
}

} // TEST_SUITE

TEST_SUITE("agents") {

TEST_CASE("targets") {
    Vector r(3), q(3), q2(3), lp(3);
    r << 1, 2, 3;
    q << 0.5, -1, 2;
    q2 << 0.4, 0, 5;
    lp << -1, -2, 0.5;
    const Vector td = td_target(r, q, 0.9);
    CHECK(td[1] == doctest::Approx(2 - 0.9));
    // No entropy term and identical twins reduce the soft target to the plain one.
    CHECK((soft_target(r, q, q, lp, 0.0, 0.9) - td).norm() == 0.0);
    const Vector soft = soft_target(r, q, q2, lp, 0.2, 0.9);
    CHECK(soft[2] == doctest::Approx(3 + 0.9 * (2 - 0.2 * 0.5)));
    CHECK(td_target(r, q, 0.0) == r);
}

TEST_CASE("critic gradient matches finite differences") {
    Rng rng(1);
    Mlp critic(7, {9, 8}, 1);
    critic.init(rng);
    const Matrix input = random_matrix(7, 5, rng);
    const Vector target = random_matrix(5, 1, rng);
    Vector grad = Vector::Zero(critic.param_count());
    critic_loss(critic, input, target, &grad);
    const Vector numeric = finite_difference(critic.params(), [&](const Vector &p) {
        Mlp probe = critic;
        probe.params() = p;
        return critic_loss(probe, input, target, nullptr);
    });
    CHECK(max_rel_error(grad, numeric) < 1e-4);
}

TEST_CASE("DDPG actor gradient through the critic matches finite differences") {
    Rng rng(2);
    Mlp actor(4, {8, 8}, 3, Squash::tanh), critic(7, {8, 8}, 1);
    actor.init(rng);
    critic.init(rng);
    // Zero biases can park a hidden unit exactly on the ReLU kink.
    for (auto &w : actor.params()) w += 0.05 * rng.normal();
    const Matrix states = random_matrix(4, 6, rng);
    Vector grad = Vector::Zero(actor.param_count());
    ddpg_actor_loss(actor, critic, states, &grad);
    const Vector numeric = finite_difference(actor.params(), [&](const Vector &p) {
        Mlp probe = actor;
        probe.params() = p;
        return ddpg_actor_loss(probe, critic, states, nullptr);
    });
    CHECK(max_rel_error(grad, numeric) < 1e-4);
}

TEST_CASE("SAC policy loss gradient matches finite differences") {
    Rng rng(3);
    const int S = 4, A = 3, B = 6;
    Mlp actor(S, {8, 8}, 2 * A), q1(S + A, {8, 8}, 1), q2(S + A, {8, 8}, 1);
    actor.init(rng);
    q1.init(rng);
    q2.init(rng);
    const Matrix states = random_matrix(S, B, rng), noise = random_matrix(A, B, rng);
    Vector grad = Vector::Zero(actor.param_count());
    sac_policy_loss(actor, q1, q2, states, noise, 0.3, &grad);
    const Vector numeric = finite_difference(actor.params(), [&](const Vector &p) {
        Mlp probe = actor;
        probe.params() = p;
        return sac_policy_loss(probe, q1, q2, states, noise, 0.3, nullptr);
    });
    CHECK(max_rel_error(grad, numeric) < 1e-4);
}

TEST_CASE("squashed Gaussian log-density matches a histogram") {
    Matrix head(2, 1);
    head << 0.3, std::log(0.6);
    Rng rng(4);
    const int n = 1000000;
    Matrix noise(1, n);
    for (auto &x : noise.reshaped()) x = rng.normal();
    const SquashedSample s = squashed_gaussian(head.replicate(1, n), noise);
    const double width = 0.02;
    for (double centre : {-0.5, 0.0, 0.25, 0.6}) {
        int hits = 0;
        for (int i = 0; i < n; ++i) hits += std::abs(s.action(0, i) - centre) < width / 2;
        const double estimate = hits / (n * width);
        Matrix at(1, 1);
        at(0, 0) = (std::atanh(centre) - 0.3) / 0.6;
        const double exact = std::exp(squashed_gaussian(head, at).log_prob[0]);
        CHECK(std::abs(estimate - exact) < 0.03 * exact); // ~4 standard errors per bin
    }
}

TEST_CASE("log_std clamp") {
    Matrix head(2, 2);
    head << 0.0, 0.0, 50.0, -50.0;
    const SquashedSample s = squashed_gaussian(head, Matrix::Ones(1, 2));
    CHECK(s.std(0, 0) == doctest::Approx(std::exp(2.0)));
    CHECK(s.std(0, 1) == doctest::Approx(std::exp(-20.0)));
    CHECK(s.log_std_active.isZero());
}

TEST_CASE("DDPG selection") {
    AgentConfig c = small_config();
    DdpgAgent agent(5, 20, c, 1);
    Rng rng(1);
    std::vector<double> state(5);
    for (auto &x : state) x = rng.normal();
    const auto det = agent.act(state, false);
    CHECK(det == agent.act(state, false));
    agent.set_noise(0.0);
    CHECK(agent.act(state, true) == det);

    agent.set_noise(0.1);
    double sum = 0, sq = 0;
    int n = 0;
    for (int t = 0; t < 10000; ++t) {
        const auto a = agent.act(state, true);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (std::abs(det[i]) > 0.5) continue; // clipping negligible at 5 sigma
            const double d = a[i] - det[i];
            sum += d;
            sq += d * d;
            ++n;
        }
    }
    REQUIRE(n > 10000);
    const double mean = sum / n;
    CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("DDPG noise anneals over the first half") {
    DdpgAgent agent(2, 2, small_config(), 1);
    agent.on_step(0, 1000);
    CHECK(agent.noise() == doctest::Approx(0.3));
    agent.on_step(250, 1000);
    CHECK(agent.noise() == doctest::Approx(0.175));
    agent.on_step(900, 1000);
    CHECK(agent.noise() == doctest::Approx(0.05));
}

TEST_CASE("DDPG targets track online networks by tau") {
    Rng rng(5);
    for (double tau : {5e-3, 1.0}) {
        AgentConfig c = small_config();
        c.tau = tau;
        DdpgAgent agent(3, 2, c, 2);
        // Knock targets away from the online networks first.
        agent.update(constant_batch(8, 3, 2, 1.0, rng));
        const Vector t_actor = agent.target_actor().params(), t_critic = agent.target_critic().params();
        agent.update(constant_batch(8, 3, 2, 0.5, rng));
        const Vector want_actor = tau * agent.actor().params() + (1 - tau) * t_actor;
        const Vector want_critic = tau * agent.critic().params() + (1 - tau) * t_critic;
        CHECK((agent.target_actor().params() - want_actor).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((agent.target_critic().params() - want_critic).cwiseAbs().maxCoeff() < 1e-14);
        if (tau == 1.0) CHECK(agent.target_critic() == agent.critic());
    }
}

TEST_CASE("DDPG critic fits a constant target with gamma 0") {
    Rng rng(6);
    AgentConfig c = small_config();
    c.gamma = 0.0;
    c.critic_lr = 1e-3;
    DdpgAgent agent(3, 2, c, 3);
    const auto batch = constant_batch(16, 3, 2, 2.5, rng);
    const double first = agent.update(batch).critic_loss;
    double last = first;
    for (int i = 0; i < 100; ++i) last = agent.update(batch).critic_loss;
    CHECK(last < first);
    const Matrix input = (Matrix(5, 1) << batch.state.col(0), batch.action.col(0)).finished();
    CHECK(agent.critic().forward(input)(0, 0) == doctest::Approx(2.5).epsilon(0.1));
}

TEST_CASE("SAC selection") {
    AgentConfig c = small_config();
    SacAgent agent(4, 6, c, 1);
    Rng rng(2);
    std::vector<double> state(4);
    for (auto &x : state) x = rng.normal();
    CHECK(agent.select(state, true).action == agent.select(state, true).action);
    for (int t = 0; t < 100000; ++t) {
        const auto sel = agent.select(state, false);
        const auto [lo, hi] = std::minmax_element(sel.action.begin(), sel.action.end());
        if (*lo < -1.0 || *hi > 1.0) FAIL("action outside the box");
        if (!std::isfinite(sel.log_prob)) FAIL("non-finite log-probability");
    }
}

TEST_CASE("temperature falls while entropy exceeds the target") {
    Rng rng(7);
    AgentConfig c = small_config();
    c.policy_delay = 1;
    SacAgent agent(3, 8, c, 4);
    CHECK(agent.target_entropy() == -8.0);
    const double before = agent.alpha();
    const auto st = agent.update(constant_batch(32, 3, 8, 1.0, rng));
    CHECK(st.alpha < before);
    CHECK(st.alpha_loss > 0.0); // log pi + H < 0, so the loss and its log-alpha gradient are positive
}

TEST_CASE("policy delay counts critic updates") {
    Rng rng(8);
    AgentConfig c = small_config();
    c.policy_delay = 2;
    SacAgent agent(3, 2, c, 5);
    const auto batch = constant_batch(8, 3, 2, 1.0, rng);
    CHECK(std::isnan(agent.update(batch).actor_loss));
    CHECK_FALSE(std::isnan(agent.update(batch).actor_loss));
    CHECK(agent.critic_updates() == 2);
}

TEST_CASE("bandit: the min-critic learns the expected reward") {
    // gamma = 0, constant state, reward 1 - mean(a^2).
    const int S = 2, A = 2;
    AgentConfig c = small_config();
    c.gamma = 0.0;
    c.critic_lr = c.actor_lr = 1e-3;
    c.batch = 64;
    SacAgent agent(S, A, c, 7);
    ReplayBuffer buf(20000, S, A);
    Rng rng(10);
    const std::vector<double> state{0.5, -0.5};
    auto reward = [](const std::vector<double> &a) { return 1.0 - 0.5 * (a[0] * a[0] + a[1] * a[1]); };
    for (int t = 0; t < 5000; ++t) {
        const auto a = t < 500 ? random_raw(A, rng) : agent.act(state, true);
        buf.push(state, a, reward(a), state, false);
        if (buf.size() >= 64) agent.update(buf.sample(64, rng));
    }
    int good = 0, total = 0;
    for (int t = 0; t < 50; ++t) {
        const auto a = agent.act(state, true);
        Matrix input(S + A, 1);
        input << state[0], state[1], a[0], a[1];
        const double q = std::min(agent.q1().forward(input)(0, 0), agent.q2().forward(input)(0, 0));
        good += std::abs(q - reward(a)) <= 0.05 * std::abs(reward(a));
        ++total;
    }
    CHECK(good >= 45);
}

TEST_CASE("checkpoint round trip reproduces behaviour") {
    Rng rng(11);
    for (AgentKind kind : {AgentKind::ddpg, AgentKind::sac}) {
        auto a = make_agent(kind, 3, 2, small_config(), 1);
        const auto batch = constant_batch(8, 3, 2, 1.0, rng);
        a->update(batch);
        std::stringstream io;
        a->save(io);
        auto b = make_agent(kind, 3, 2, small_config(), 99);
        b->load(io);
        const std::vector<double> s{0.1, 0.2, 0.3};
        CHECK(a->act(s, true) == b->act(s, true));
        a->update(batch);
        b->update(batch);
        CHECK(a->act(s, false) == b->act(s, false));
    }
}

TEST_CASE("agent kind names") {
    CHECK(parse_agent_kind("sac") == AgentKind::sac);
    CHECK(parse_agent_kind("ddpg") == AgentKind::ddpg);
    CHECK(to_string(AgentKind::ddpg) == "ddpg");
    CHECK_THROWS_AS(parse_agent_kind("ppo"), InvalidConfig);
}

} // TEST_SUITE

TEST_SUITE("train") {

namespace {
Scenario tiny() {
    Shape sh;
    sh.vsps = 1;
    sh.users = 2;
    sh.reusable = 0;
    sh.dedicated = 2;
    sh.ris = 1;
    sh.elements = 2;
    return scenario_for(sh);
}

TrainConfig quick(AgentKind kind, int steps) {
    TrainConfig t;
    t.kind = kind;
    t.steps = steps;
    t.warmup = 200;
    t.episode_length = 100000;
    t.agent.hidden = {32, 32};
    t.agent.batch = 32;
    t.agent.buffer = 10000;
    t.agent.actor_lr = t.agent.critic_lr = 1e-3;
    return t;
}
} // namespace

TEST_CASE("T = 0 stores only warm-up transitions") {
    std::vector<StepRecord> records;
    const auto summary = train(tiny(), quick(AgentKind::sac, 0), 1, [&](const StepRecord &r) { records.push_back(r); });
    CHECK(records.empty());
    CHECK(summary.updates == 0);
    CHECK(summary.buffer_size == 200);
}

TEST_CASE("fixed seed reproduces the metrics stream") {
    for (AgentKind kind : {AgentKind::ddpg, AgentKind::sac}) {
        std::vector<StepRecord> a, b;
        train(tiny(), quick(kind, 150), 3, [&](const StepRecord &r) { a.push_back(r); });
        train(tiny(), quick(kind, 150), 3, [&](const StepRecord &r) { b.push_back(r); });
        REQUIRE(a.size() == 150);
        REQUIRE(b.size() == a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].reward_raw == b[i].reward_raw);
            CHECK((a[i].update.critic_loss == b[i].update.critic_loss ||
                   (std::isnan(a[i].update.critic_loss) && std::isnan(b[i].update.critic_loss))));
        }
    }
}

TEST_CASE("smoke run improves over its first steps") {
    std::vector<double> gains;
    for (std::uint64_t seed : {1, 2, 3}) {
        std::vector<double> rewards;
        train(tiny(), quick(AgentKind::sac, 2000), seed, [&](const StepRecord &r) { rewards.push_back(r.reward_raw); });
        double first = 0, last = 0;
        for (int i = 0; i < 200; ++i) {
            first += rewards[i];
            last += rewards[rewards.size() - 200 + i];
        }
        gains.push_back(last - first);
    }
    std::sort(gains.begin(), gains.end());
    CHECK(gains[1] > 0.0);
}

} // TEST_SUITE
