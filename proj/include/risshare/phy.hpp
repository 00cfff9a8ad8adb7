#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "risshare/channel.hpp"
#include "risshare/topology.hpp"

namespace risshare {

// Scheduling, association, power and RIS phases for one slot. Link arrays are
// indexed (gb * users_per_vsp + k) * num_subchannels + c, where gb is the global
// BS index and k the user's index inside the BS's VSP.
struct Allocation {
    int users_per_vsp = 0;
    int num_subchannels = 0;
    std::vector<std::uint8_t> omega;
    std::vector<std::uint8_t> phi; // gb * users_per_vsp + k
    std::vector<double> power;
    RisPhases phases;

    static Allocation empty(const Scenario &scenario);

    std::size_t link(int gb, int k, int c) const {
        return (static_cast<std::size_t>(gb) * users_per_vsp + k) * num_subchannels + c;
    }
    std::size_t assoc(int gb, int k) const { return static_cast<std::size_t>(gb) * users_per_vsp + k; }

    bool operator==(const Allocation &) const = default;
};

// Returns one message per violated constraint; empty when the allocation is feasible.
std::vector<std::string> check_allocation(const Scenario &scenario, const Allocation &alloc, double tol = 1e-9);

// |effective channel|^2 for every (c, b, k).
class LinkGains {
public:
    LinkGains() = default;
    LinkGains(const ChannelRealization &real, const RisPhases &phases, const RisAssociation &assoc);

    double operator()(int b, int k, int c) const { return g2_[(static_cast<std::size_t>(c) * num_bs_ + b) * num_users_ + k]; }
    double &at(int b, int k, int c) { return g2_[(static_cast<std::size_t>(c) * num_bs_ + b) * num_users_ + k]; }

    int num_bs() const { return num_bs_; }
    int num_users() const { return num_users_; }
    int subchannels() const { return subchannels_; }

    static LinkGains zeros(int subchannels, int num_bs, int num_users);

private:
    int subchannels_ = 0;
    int num_bs_ = 0;
    int num_users_ = 0;
    std::vector<double> g2_;
};

// I1 + I2 + I3 at user k of VSP v served by BS b (local indices) on subchannel c.
double interference(const Scenario &s, const LinkGains &gains, const Allocation &alloc, int v, int b, int k, int c);
double interference(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                    const RisAssociation &assoc, const Allocation &alloc, int v, int b, int k, int c);

struct SinrRate {
    double sinr = 0.0;
    double rate = 0.0;
};

SinrRate sinr_and_rate(const Scenario &s, const LinkGains &gains, const Allocation &alloc, int v, int b, int k, int c);
SinrRate sinr_and_rate(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                       const RisAssociation &assoc, const Allocation &alloc, int v, int b, int k, int c);

// B_c log2(1 + sinr).
double rate_from_sinr(double bandwidth, double sinr);

struct UtilityBreakdown {
    std::vector<double> revenue;
    std::vector<double> spectrum_cost;
    std::vector<double> ris_cost;
    std::vector<double> power_cost;
    std::vector<double> utility;
    std::vector<int> used_reusable;
    std::vector<int> used_dedicated;
    std::vector<int> used_ris;
    std::vector<double> user_rate; // per global user
    double sum_utility = 0.0;
    double qos_penalty = 0.0;
    double sum_rate = 0.0;

    double reward() const { return sum_utility - qos_penalty; }
};

// Per-user total rates R_{k,v} (global user index).
std::vector<double> user_rates(const Scenario &s, const LinkGains &gains, const Allocation &alloc);

UtilityBreakdown utility_breakdown(const Scenario &s, const LinkGains &gains, const Allocation &alloc);
UtilityBreakdown utility_breakdown(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                                   const RisAssociation &assoc, const Allocation &alloc);

} // namespace risshare
