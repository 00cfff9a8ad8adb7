#include "doctest.h"
#include "risshare/errors.hpp"
#include "support.hpp"

using namespace risshare;
using namespace testing;

TEST_SUITE("env") {

TEST_CASE("action dimension formula") {
    ScenarioConfig c;
    c.users_per_vsp = 4;
    const Scenario s = build_scenario(c);
    // 2 * V * B * K * |accessible| + J * M
    CHECK(action_layout(s).dim() == 2 * 2 * 1 * 4 * 4 + 8);
}

TEST_CASE("threshold at one half") {
    Shape sh;
    sh.vsps = 1;
    sh.users = 1;
    sh.reusable = 0;
    sh.dedicated = 2;
    sh.ris = 0;
    const Scenario s = scenario_for(sh);
    const auto assoc = fix_ris_association(s);
    // Scores 0.7 and 0.3 on the user's two links.
    std::vector<double> raw{0.4, -0.4, 0.0, 0.0};
    const Allocation a = project_action(s, assoc, raw);
    CHECK(a.omega[a.link(0, 0, 0)] == 1);
    CHECK(a.omega[a.link(0, 0, 1)] == 0);
    CHECK(a.phi[a.assoc(0, 0)] == 1);
    CHECK(a.power[a.link(0, 0, 0)] == doctest::Approx(0.5));
    raw[0] = 0.0; // score exactly 0.5 passes
    CHECK(project_action(s, assoc, raw).omega[0] == 1);
}

TEST_CASE("one link per user, best score first") {
    Shape sh;
    sh.vsps = 1;
    sh.users = 1;
    sh.reusable = 0;
    sh.dedicated = 3;
    sh.ris = 0;
    const Scenario s = scenario_for(sh);
    const auto assoc = fix_ris_association(s);
    const Allocation a = project_action(s, assoc, std::vector<double>{0.2, 0.9, 0.9, 1, 1, 1});
    CHECK(a.omega[1] == 1); // tie between 1 and 2 goes to the first
    CHECK(a.omega[0] + a.omega[1] + a.omega[2] == 1);
}

TEST_CASE("at most L_c users per subchannel, highest scores kept") {
    Shape sh;
    sh.vsps = 1;
    sh.users = 3;
    sh.reusable = 0;
    sh.dedicated = 1;
    sh.l_c = 2;
    sh.ris = 0;
    const Scenario s = scenario_for(sh);
    const auto assoc = fix_ris_association(s);
    const Allocation a = project_action(s, assoc, std::vector<double>{0.1, 0.8, 0.5, 0, 0, 0});
    CHECK(a.omega[a.link(0, 0, 0)] == 0);
    CHECK(a.omega[a.link(0, 1, 0)] == 1);
    CHECK(a.omega[a.link(0, 2, 0)] == 1);
    CHECK(a.phi[a.assoc(0, 0)] == 0);
}

TEST_CASE("over-budget BS powers rescale proportionally") {
    Shape sh;
    sh.vsps = 1;
    sh.users = 2;
    sh.reusable = 0;
    sh.dedicated = 2;
    sh.ris = 0;
    const Scenario s = scenario_for(sh);
    const auto assoc = fix_ris_association(s);
    // User 0 on channel 0, user 1 on channel 1, both at 0.8 P_max.
    const std::vector<double> raw{1, -1, -1, 1, 0.6, 0.6, 0.6, 0.6};
    const Allocation a = project_action(s, assoc, raw);
    const double p0 = a.power[a.link(0, 0, 0)], p1 = a.power[a.link(0, 1, 1)];
    CHECK(p0 == doctest::Approx(0.8 / 1.6));
    CHECK(p1 == doctest::Approx(0.8 / 1.6));
    CHECK(p0 + p1 == doctest::Approx(s.p_max));
    CHECK(a.power[a.link(0, 0, 1)] == 0.0);
}

TEST_CASE("phase mapping wraps into [0, 2pi)") {
    Shape sh;
    sh.elements = 3;
    const Scenario s = scenario_for(sh);
    const auto assoc = fix_ris_association(s);
    const auto layout = action_layout(s);
    std::vector<double> raw(layout.dim(), -1.0);
    raw[layout.phase_offset()] = -1.0;
    raw[layout.phase_offset() + 1] = 0.0;
    raw[layout.phase_offset() + 2] = 1.0;
    const Allocation a = project_action(s, assoc, raw);
    CHECK(a.phases.theta[0][0] == 0.0);
    CHECK(a.phases.theta[0][1] == doctest::Approx(M_PI));
    CHECK(a.phases.theta[0][2] == 0.0);
}

TEST_CASE("wrong dimension throws") {
    const Scenario s = build_scenario(ScenarioConfig{});
    const auto assoc = fix_ris_association(s);
    CHECK_THROWS_AS(project_action(s, assoc, std::vector<double>(3, 0.0)), DimensionMismatch);
}

TEST_CASE("fuzzed projections are feasible and idempotent") {
    Rng rng(21);
    for (int t = 0; t < 200; ++t) {
        const Scenario s = scenario_for(random_shape(rng), t + 1);
        const auto assoc = fix_ris_association(s);
        const int dim = action_layout(s).dim();
        for (int i = 0; i < 20; ++i) {
            const Allocation a = project_action(s, assoc, random_raw(dim, rng));
            CHECK(check_allocation(s, a).empty());
            const Allocation again = project_action(s, assoc, encode_action(s, a));
            CHECK(again.omega == a.omega);
            CHECK(again.phi == a.phi);
            for (std::size_t l = 0; l < a.power.size(); ++l) CHECK(again.power[l] == doctest::Approx(a.power[l]).epsilon(1e-12));
            for (std::size_t j = 0; j < a.phases.theta.size(); ++j)
                for (std::size_t m = 0; m < a.phases.theta[j].size(); ++m)
                    CHECK(again.phases.theta[j][m] == doctest::Approx(a.phases.theta[j][m]).epsilon(1e-12));
        }
    }
}

TEST_CASE("executed action slice round trip") {
    Rng rng(8);
    const Scenario s = build_scenario(ScenarioConfig{});
    const auto assoc = fix_ris_association(s);
    const Allocation a = project_action(s, assoc, random_raw(action_layout(s).dim(), rng));
    const auto slice = encode_executed_action(s, a);
    CHECK(static_cast<int>(slice.size()) == state_layout(s).action_dim);
    for (double x : slice) {
        CHECK(x >= -1.0);
        CHECK(x <= 1.0);
    }
    const Allocation back = decode_executed_action(s, slice);
    CHECK(back.omega == a.omega);
    CHECK(back.phi == a.phi);
    for (std::size_t l = 0; l < a.power.size(); ++l) CHECK(back.power[l] == doctest::Approx(a.power[l]));
}

TEST_CASE("state dimension by hand") {
    ScenarioConfig c;
    c.users_per_vsp = 4;
    const Scenario s = build_scenario(c);
    const int C = 6, NB = 2, NK = 8, M = 8;
    const int channels = 2 * (C * NB * NK + C * NB * M + C * NK * M);
    const int links = 2 * 1 * 4 * 4;
    Environment env(s, EnvConfig{}, 1);
    CHECK(env.state_dim() == channels + NK + 2 * links + M);
    CHECK(env.reset().size() == static_cast<std::size_t>(channels + NK + 2 * links + M));
}

TEST_CASE("reset is deterministic and starts from zero rates and the idle action") {
    const Scenario s = build_scenario(ScenarioConfig{});
    Environment a(s, EnvConfig{}, 5), b(s, EnvConfig{}, 5);
    const auto sa = a.reset();
    CHECK(sa == b.reset());
    const auto layout = state_layout(s);
    for (int i = 0; i < layout.rate_dim; ++i) CHECK(sa[layout.rate_offset() + i] == 0.0);
    const auto idle = encode_executed_action(s, Allocation::empty(s));
    for (int i = 0; i < layout.action_dim; ++i) CHECK(sa[layout.action_offset() + i] == idle[i]);
    for (double x : sa) CHECK(std::isfinite(x));
    CHECK(a.reset() != sa); // fresh fading
}

TEST_CASE("stepping before reset throws") {
    const Scenario s = build_scenario(ScenarioConfig{});
    Environment env(s, EnvConfig{2}, 5);
    const std::vector<double> raw(env.action_dim(), -1.0);
    CHECK_THROWS_AS(env.step(raw), NotReset);
    env.reset();
    CHECK_FALSE(env.step(raw).done);
    CHECK(env.step(raw).done);
    CHECK_THROWS_AS(env.step(raw), NotReset);
}

TEST_CASE("idle action reward is the fixed RIS cost minus the full QoS penalty") {
    const Scenario s = build_scenario(ScenarioConfig{});
    Environment env(s, EnvConfig{}, 3);
    env.reset();
    // All-minus-one schedules nobody.
    const auto r = env.step(std::vector<double>(env.action_dim(), -1.0));
    double expected = 0.0;
    for (int v = 0; v < s.num_vsps; ++v) expected -= s.phi2 * s.prices.ris * s.ris_owned_by(v).size();
    for (double th : s.rate_threshold) expected -= s.qos_penalty_weight * th;
    CHECK(r.reward == doctest::Approx(expected));
}

TEST_CASE("fuzzed steps yield feasible allocations and consistent states") {
    Rng rng(31);
    const Scenario s = build_scenario(ScenarioConfig{});
    Environment env(s, EnvConfig{100}, 6);
    env.reset();
    const auto layout = state_layout(s);
    for (int t = 0; t < 10000; ++t) {
        if (t % 100 == 0 && t > 0) env.reset();
        const auto r = env.step(random_raw(env.action_dim(), rng));
        CHECK(check_allocation(s, r.allocation).empty());
        CHECK(r.reward == r.info.sum_utility - r.info.qos_penalty);
        for (int k = 0; k < s.total_users(); ++k) CHECK(r.state[layout.rate_offset() + k] == r.info.user_rate[k]);
    }
}

TEST_CASE("without a QoS weight the reward is the summed utility") {
    ScenarioConfig c;
    c.qos_penalty = 0.0;
    const Scenario s = build_scenario(c);
    Environment env(s, EnvConfig{}, 4);
    env.reset();
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        const auto r = env.step(random_raw(env.action_dim(), rng));
        CHECK(r.reward == r.info.sum_utility);
    }
}

} // TEST_SUITE
