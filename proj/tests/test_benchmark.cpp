#include <numbers>

#include "doctest.h"
#include "risshare/benchmark.hpp"
#include "risshare/errors.hpp"
#include "support.hpp"

using namespace risshare;
using namespace testing;

namespace {

Shape tiny(int vsps, int users, int channels, int l_c) {
    Shape sh;
    sh.vsps = vsps;
    sh.users = users;
    sh.reusable = 0;
    sh.dedicated = channels;
    sh.l_c = l_c;
    sh.ris = 0;
    return sh;
}

// Single scheduled link with gain g on an otherwise silent network.
struct SingleLink {
    Scenario s;
    LinkGains gains;
    Allocation start;
};

SingleLink single_link(double g) {
    SingleLink out{scenario_for(tiny(1, 1, 1, 1)), {}, {}};
    out.s.qos_penalty_weight = 0.0;
    out.gains = LinkGains::zeros(1, 1, 1);
    out.gains.at(0, 0, 0) = g;
    out.start = Allocation::empty(out.s);
    out.start.omega[0] = 1;
    out.start.phi[0] = 1;
    assign_uniform_power(out.s, out.start);
    return out;
}

double closed_form_power(const Scenario &s, double g) {
    const double p = s.phi1 * s.profit_per_rate[0] / (s.phi2 * s.prices.power * std::numbers::ln2) - s.noise_power / g;
    return std::clamp(p, 0.0, s.p_max);
}

} // namespace

TEST_SUITE("benchmark") {

TEST_CASE("enumeration counts by hand") {
    CHECK(enumerate_discrete(scenario_for(tiny(1, 1, 2, 1))).size() == 3);
    CHECK(enumerate_discrete(scenario_for(tiny(1, 2, 2, 1))).size() == 7);
}

TEST_CASE("every enumerated configuration is feasible under uniform power") {
    Rng rng(41);
    for (int t = 0; t < 30; ++t) {
        const Scenario s = scenario_for(random_shape(rng), t + 1);
        std::int64_t n = 0;
        for_each_discrete(s, [&](const Allocation &candidate) {
            Allocation a = candidate;
            assign_uniform_power(s, a);
            CHECK(check_allocation(s, a).empty());
            ++n;
        });
        CHECK(n >= 1);
    }
}

TEST_CASE("uniform power splits the budget per BS") {
    Shape sh;
    sh.bs = 2;
    const Scenario s = scenario_for(sh);
    Allocation a = Allocation::empty(s);
    const int b0 = s.bs_index(0, 0), b1 = s.bs_index(1, 1);
    a.omega[a.link(b0, 0, 0)] = a.omega[a.link(b0, 1, 1)] = 1;
    a.phi[a.assoc(b0, 0)] = a.phi[a.assoc(b0, 1)] = 1;
    a.omega[a.link(b1, 0, 2)] = 1;
    a.phi[a.assoc(b1, 0)] = 1;
    assign_uniform_power(s, a);
    CHECK(a.power[a.link(b0, 0, 0)] == doctest::Approx(s.p_max / 2));
    CHECK(a.power[a.link(b0, 1, 1)] == doctest::Approx(s.p_max / 2));
    CHECK(a.power[a.link(b1, 0, 2)] == doctest::Approx(s.p_max));
    CHECK(a.power[a.link(b0, 0, 1)] == 0.0);
}

TEST_CASE("single link matches the closed-form optimum") {
    // Interior optimum, then one clamped at the budget.
    for (double g : {1.0 / 14.0, 1.0 / 14.3, 5.0}) {
        const SingleLink sl = single_link(g);
        const ScaResult r = sca_refine(sl.s, sl.gains, sl.start);
        const double expect = closed_form_power(sl.s, g);
        CHECK(r.allocation.power[0] == doctest::Approx(expect).epsilon(1e-6));
        CHECK(std::abs(r.allocation.power[0] - expect) < 1e-6);
        // Interference term is constant, so the surrogate is exact.
        const PowerModel m(sl.s, sl.gains, sl.start);
        const std::vector<double> p{0.3}, anchor{0.8};
        CHECK(m.surrogate(p, anchor, 0.0, nullptr) == doctest::Approx(m.objective(p, 0.0)).epsilon(1e-12));
    }
}

TEST_CASE("zero budget returns zero powers and the fixed-cost objective") {
    SingleLink sl = single_link(1.0);
    sl.s.p_max = 0.0;
    assign_uniform_power(sl.s, sl.start);
    const ScaResult r = sca_refine(sl.s, sl.gains, sl.start);
    CHECK(r.allocation.power[0] == 0.0);
    const double fixed = sl.s.prices.dedicated + sl.s.prices.ris * sl.s.ris_owned_by(0).size();
    CHECK(r.objective == doctest::Approx(-sl.s.phi2 * fixed));
}

TEST_CASE("surrogate is a tight lower bound") {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const Scenario s = scenario_for(tiny(2, 2, 2, 2), t + 1);
        const auto assoc = fix_ris_association(s);
        const LinkGains gains(draw_channels(s, rng), RisPhases::zeros(s), assoc);
        Allocation a = Allocation::empty(s);
        for (int v = 0; v < 2; ++v)
            for (int k = 0; k < 2; ++k) {
                a.omega[a.link(v, k, k)] = 1;
                a.phi[a.assoc(v, k)] = 1;
            }
        assign_uniform_power(s, a);
        const PowerModel m(s, gains, a);
        REQUIRE(m.size() == 4);
        std::vector<double> anchor(4), p(4);
        for (int i = 0; i < 4; ++i) {
            anchor[i] = rng.uniform(0.0, 0.5);
            p[i] = rng.uniform(0.0, 0.5);
        }
        CHECK(m.surrogate(anchor, anchor, 50.0, nullptr) == doctest::Approx(m.objective(anchor, 50.0)).epsilon(1e-12));
        CHECK(m.surrogate(p, anchor, 50.0, nullptr) <= m.objective(p, 50.0) + 1e-12);
    }
}

TEST_CASE("SCA history is monotone and never loses to uniform power") {
    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
        const Scenario s = scenario_for(random_shape(rng), t + 1);
        const auto assoc = fix_ris_association(s);
        const auto real = draw_channels(s, rng);
        const auto configs = enumerate_discrete(s);
        Allocation start = configs[rng.below(configs.size())];
        assign_uniform_power(s, start);
        const ScaResult r = sca_refine(s, real, RisPhases::zeros(s), assoc, start);
        CHECK(r.objective >= r.start_objective - 1e-12);
        CHECK(check_allocation(s, r.allocation).empty());
        for (std::size_t i = 1; i < r.history.size(); ++i) {
            if (r.history[i].qos_weight != r.history[i - 1].qos_weight) continue;
            CHECK(r.history[i].surrogate >= r.history[i - 1].penalized - 1e-9);
            CHECK(r.history[i].penalized >= r.history[i].surrogate - 1e-9);
        }
    }
}

TEST_CASE("EDS agrees with the brute-force oracle on tiny instances") {
    Rng rng(7);
    for (int t = 0; t < 4; ++t) {
        const Scenario s = scenario_for(tiny(1 + t % 2, 2, 2, 1), t + 1);
        const auto assoc = fix_ris_association(s);
        const auto real = draw_channels(s, rng);
        const EdsResult eds = eds_solve(s, real, assoc);
        const OracleResult oracle = brute_force_oracle(s, real, RisPhases::zeros(s), assoc, 21);
        CHECK(check_allocation(s, eds.allocation).empty());
        CHECK(check_allocation(s, oracle.allocation).empty());
        CHECK(eds.reward >= oracle.reward - 0.02 * std::abs(oracle.reward));
        CHECK(eds.reward >= eds.stage1_reward - 1e-12);
    }
}

TEST_CASE("a dominant user is scheduled") {
    const Scenario s = scenario_for(tiny(1, 2, 1, 1));
    const auto assoc = fix_ris_association(s);
    auto real = draw_channels(s, 3);
    real.direct(0, 0, 0) = 10.0 * std::abs(real.direct(0, 1, 0));
    const EdsResult eds = eds_solve(s, real, assoc);
    CHECK(eds.allocation.omega[eds.allocation.link(0, 0, 0)] == 1);
    CHECK(eds.allocation.omega[eds.allocation.link(0, 1, 0)] == 0);
}

TEST_CASE("all-zero channels leave the network idle") {
    const Scenario s = scenario_for(Shape{});
    const auto assoc = fix_ris_association(s);
    const ChannelRealization zero(s.num_subchannels, s.total_bs(), s.total_users(), s.elements_per_ris);
    const EdsResult eds = eds_solve(s, zero, assoc);
    for (auto w : eds.allocation.omega) CHECK(w == 0);
    CHECK(eds.config_id == 0);
}

TEST_CASE("two-point grid picks off or full power") {
    Scenario s = scenario_for(tiny(1, 1, 1, 1));
    const auto assoc = fix_ris_association(s);
    const auto real = draw_channels(s, 9);
    const OracleResult oracle = brute_force_oracle(s, real, RisPhases::zeros(s), assoc, 2);
    Allocation off = Allocation::empty(s), full = Allocation::empty(s);
    full.omega[0] = 1;
    full.phi[0] = 1;
    full.power[0] = s.p_max;
    const double r_off = utility_breakdown(s, real, off.phases, assoc, off).reward();
    const double r_full = utility_breakdown(s, real, full.phases, assoc, full).reward();
    CHECK(oracle.reward == doctest::Approx(std::max(r_off, r_full)));
    CHECK(oracle.evaluations == 3); // idle plus two power levels
}

TEST_CASE("finer oracle grid never does worse") {
    Rng rng(10);
    for (int t = 0; t < 5; ++t) {
        const Scenario s = scenario_for(tiny(1, 2, 2, 1), t + 1);
        const auto assoc = fix_ris_association(s);
        const auto real = draw_channels(s, rng);
        const double coarse = brute_force_oracle(s, real, RisPhases::zeros(s), assoc, 5).reward;
        const double fine = brute_force_oracle(s, real, RisPhases::zeros(s), assoc, 21).reward;
        CHECK(fine >= coarse);
    }
}

TEST_CASE("oversized searches are refused") {
    ScenarioConfig c;
    c.users_per_vsp = 10;
    const Scenario s = build_scenario(c);
    CHECK(discrete_candidate_count(s) > kMaxDiscreteCandidates);
    CHECK_THROWS_AS(enumerate_discrete(s), SearchSpaceTooLarge);
    const auto assoc = fix_ris_association(s);
    CHECK_THROWS_AS(eds_solve(s, draw_channels(s, 1), assoc), SearchSpaceTooLarge);
    const Scenario mid = scenario_for(tiny(2, 2, 2, 2));
    CHECK_THROWS_AS(brute_force_oracle(mid, draw_channels(mid, 1), RisPhases::zeros(mid), fix_ris_association(mid), 1000),
                    SearchSpaceTooLarge);
}

TEST_CASE("result record") {
    const Scenario s = scenario_for(tiny(1, 2, 2, 1));
    const EdsResult eds = eds_solve(s, draw_channels(s, 2), fix_ris_association(s));
    const auto j = to_json(eds, s);
    CHECK(j.at("stage2_reward").get<double>() == eds.reward);
    CHECK(j.at("stage1_reward").get<double>() == eds.stage1_reward);
    CHECK(j.at("config_id").get<std::int64_t>() == eds.config_id);
    CHECK(j.at("iterations").get<int>() == eds.iterations);
    CHECK(j.contains("powers"));
}

} // TEST_SUITE
