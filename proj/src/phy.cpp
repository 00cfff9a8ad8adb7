#include "risshare/phy.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace risshare {

Allocation Allocation::empty(const Scenario &s) {
    Allocation a;
    a.users_per_vsp = s.users_per_vsp;
    a.num_subchannels = s.num_subchannels;
    const std::size_t links = static_cast<std::size_t>(s.total_bs()) * s.users_per_vsp * s.num_subchannels;
    a.omega.assign(links, 0);
    a.power.assign(links, 0.0);
    a.phi.assign(static_cast<std::size_t>(s.total_bs()) * s.users_per_vsp, 0);
    a.phases = RisPhases::zeros(s);
    return a;
}

std::vector<std::string> check_allocation(const Scenario &s, const Allocation &a, double tol) {
    std::vector<std::string> bad;
    auto fail = [&](const std::string &msg) { bad.push_back(msg); };
    const int V = s.num_vsps, B = s.bs_per_vsp, K = s.users_per_vsp, C = s.num_subchannels;
    const std::size_t links = static_cast<std::size_t>(s.total_bs()) * K * C;
    if (a.omega.size() != links || a.power.size() != links || a.phi.size() != static_cast<std::size_t>(s.total_bs()) * K ||
        a.users_per_vsp != K || a.num_subchannels != C) {
        fail("allocation dimensions do not match the scenario");
        return bad;
    }

    for (int v = 0; v < V; ++v) {
        const std::set<int> acc(s.accessible[v].begin(), s.accessible[v].end());
        for (int b = 0; b < B; ++b) {
            const int gb = s.bs_index(v, b);
            double bs_power = 0.0;
            for (int c = 0; c < C; ++c) {
                int scheduled = 0;
                for (int k = 0; k < K; ++k) {
                    const auto l = a.link(gb, k, c);
                    const int w = a.omega[l];
                    const double p = a.power[l];
                    if (w > 1) fail("omega not binary");
                    if (!acc.count(c) && (w != 0 || p != 0.0))
                        fail("VSP " + std::to_string(v) + " uses inaccessible subchannel " + std::to_string(c));
                    if (p < 0.0 || p > w * s.p_max + tol)
                        fail("power/scheduling link violated at v=" + std::to_string(v) + " b=" +
                             std::to_string(b) + " k=" + std::to_string(k) + " c=" + std::to_string(c));
                    if (w > a.phi[a.assoc(gb, k)]) fail("scheduling without association");
                    scheduled += w;
                    bs_power += p;
                }
                if (scheduled > s.max_users_per_subchannel)
                    fail("too many users on subchannel " + std::to_string(c) + " of BS " + std::to_string(gb));
            }
            if (bs_power > s.p_max + tol * std::max(1.0, s.p_max)) fail("BS " + std::to_string(gb) + " over budget");
        }
        for (int k = 0; k < K; ++k) {
            int assoc = 0, sched = 0;
            for (int b = 0; b < B; ++b) {
                const int gb = s.bs_index(v, b);
                const int f = a.phi[a.assoc(gb, k)];
                if (f > 1) fail("phi not binary");
                assoc += f;
                for (int c = 0; c < C; ++c) sched += a.omega[a.link(gb, k, c)];
            }
            if (assoc > 1) fail("user associated with several BSs");
            if (sched > 1) fail("user scheduled on several subchannels");
        }
    }
    if (static_cast<int>(a.phases.theta.size()) != s.num_ris) {
        fail("phase vector count does not match RIS count");
    } else {
        for (int j = 0; j < s.num_ris; ++j) {
            if (static_cast<int>(a.phases.theta[j].size()) != s.elements_per_ris[j]) fail("phase vector length mismatch");
            for (double t : a.phases.theta[j])
                if (!(t >= 0.0 && t < 2.0 * std::numbers::pi)) fail("phase outside [0, 2pi)");
        }
    }
    return bad;
}

LinkGains::LinkGains(const ChannelRealization &real, const RisPhases &phases, const RisAssociation &assoc)
    : subchannels_(real.subchannels()), num_bs_(real.num_bs()), num_users_(real.num_users()) {
    const auto table = effective_channel_table(real, phases, assoc);
    g2_.resize(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) g2_[i] = std::norm(table[i]);
}

LinkGains LinkGains::zeros(int subchannels, int num_bs, int num_users) {
    LinkGains g;
    g.subchannels_ = subchannels;
    g.num_bs_ = num_bs;
    g.num_users_ = num_users;
    g.g2_.assign(static_cast<std::size_t>(subchannels) * num_bs * num_users, 0.0);
    return g;
}

double interference(const Scenario &s, const LinkGains &g, const Allocation &a, int v, int b, int k, int c) {
    const int K = s.users_per_vsp;
    const int gb = s.bs_index(v, b);
    const int gk = s.user_index(v, k);

    double i1 = 0.0;
    for (int u = 0; u < K; ++u) {
        if (u == k) continue;
        const auto l = a.link(gb, u, c);
        if (a.omega[l]) i1 += a.power[l];
    }
    i1 *= g(gb, gk, c);

    double i2 = 0.0;
    for (int bp = 0; bp < s.bs_per_vsp; ++bp) {
        if (bp == b) continue;
        const int gbp = s.bs_index(v, bp);
        double tx = 0.0;
        for (int u = 0; u < K; ++u) {
            const auto l = a.link(gbp, u, c);
            if (a.omega[l]) tx += a.power[l];
        }
        i2 += tx * g(gbp, gk, c);
    }

    double i3 = 0.0;
    if (s.reuse_flag[c]) {
        for (int vp = 0; vp < s.num_vsps; ++vp) {
            if (vp == v) continue;
            for (int bp = 0; bp < s.bs_per_vsp; ++bp) {
                const int gbp = s.bs_index(vp, bp);
                double tx = 0.0;
                for (int u = 0; u < K; ++u) {
                    const auto l = a.link(gbp, u, c);
                    if (a.omega[l]) tx += a.power[l];
                }
                i3 += tx * g(gbp, gk, c);
            }
        }
    }
    return i1 + i2 + i3;
}

double interference(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                    const RisAssociation &assoc, const Allocation &alloc, int v, int b, int k, int c) {
    return interference(s, LinkGains(real, phases, assoc), alloc, v, b, k, c);
}

double rate_from_sinr(double bandwidth, double sinr) { return bandwidth * std::log1p(sinr) / std::numbers::ln2; }

SinrRate sinr_and_rate(const Scenario &s, const LinkGains &g, const Allocation &a, int v, int b, int k, int c) {
    const int gb = s.bs_index(v, b);
    const auto l = a.link(gb, k, c);
    if (!a.omega[l]) return {};
    const double signal = a.power[l] * g(gb, s.user_index(v, k), c);
    const double sinr = signal / (interference(s, g, a, v, b, k, c) + s.noise_power);
    return {sinr, rate_from_sinr(s.bandwidth, sinr)};
}

SinrRate sinr_and_rate(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                       const RisAssociation &assoc, const Allocation &alloc, int v, int b, int k, int c) {
    return sinr_and_rate(s, LinkGains(real, phases, assoc), alloc, v, b, k, c);
}

std::vector<double> user_rates(const Scenario &s, const LinkGains &g, const Allocation &a) {
    std::vector<double> rates(s.total_users(), 0.0);
    for (int v = 0; v < s.num_vsps; ++v)
        for (int b = 0; b < s.bs_per_vsp; ++b)
            for (int k = 0; k < s.users_per_vsp; ++k)
                for (int c : s.accessible[v])
                    if (a.omega[a.link(s.bs_index(v, b), k, c)])
                        rates[s.user_index(v, k)] += sinr_and_rate(s, g, a, v, b, k, c).rate;
    return rates;
}

UtilityBreakdown utility_breakdown(const Scenario &s, const LinkGains &g, const Allocation &a) {
    const int V = s.num_vsps;
    UtilityBreakdown u;
    u.revenue.assign(V, 0.0);
    u.spectrum_cost.assign(V, 0.0);
    u.ris_cost.assign(V, 0.0);
    u.power_cost.assign(V, 0.0);
    u.utility.assign(V, 0.0);
    u.used_reusable.assign(V, 0);
    u.used_dedicated.assign(V, 0);
    u.used_ris.assign(V, 0);
    u.user_rate = user_rates(s, g, a);

    for (int v = 0; v < V; ++v) {
        double vsp_rate = 0.0;
        for (int k = 0; k < s.users_per_vsp; ++k) vsp_rate += u.user_rate[s.user_index(v, k)];
        double total_power = 0.0;
        for (int c = 0; c < s.num_subchannels; ++c) {
            bool active = false;
            for (int b = 0; b < s.bs_per_vsp; ++b)
                for (int k = 0; k < s.users_per_vsp; ++k) {
                    const auto l = a.link(s.bs_index(v, b), k, c);
                    if (a.omega[l]) active = true;
                    total_power += a.power[l];
                }
            if (active) (s.reuse_flag[c] ? u.used_reusable[v] : u.used_dedicated[v]) += 1;
        }
        u.used_ris[v] = static_cast<int>(s.ris_owned_by(v).size());
        u.revenue[v] = s.profit_per_rate[v] * vsp_rate;
        u.spectrum_cost[v] = u.used_reusable[v] * s.prices.reused + u.used_dedicated[v] * s.prices.dedicated;
        u.ris_cost[v] = u.used_ris[v] * s.prices.ris;
        u.power_cost[v] = s.prices.power * s.bandwidth * total_power;
        u.utility[v] = s.phi1 * u.revenue[v] - s.phi2 * (u.spectrum_cost[v] + u.ris_cost[v] + u.power_cost[v]);
        u.sum_utility += u.utility[v];
        u.sum_rate += vsp_rate;
    }
    for (int gk = 0; gk < s.total_users(); ++gk)
        u.qos_penalty += std::max(0.0, s.rate_threshold[gk] - u.user_rate[gk]);
    u.qos_penalty *= s.qos_penalty_weight;
    return u;
}

UtilityBreakdown utility_breakdown(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                                   const RisAssociation &assoc, const Allocation &alloc) {
    return utility_breakdown(s, LinkGains(real, phases, assoc), alloc);
}

} // namespace risshare
