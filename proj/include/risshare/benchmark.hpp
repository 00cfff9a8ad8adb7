#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"
#include "risshare/channel.hpp"
#include "risshare/phy.hpp"
#include "risshare/topology.hpp"

namespace risshare {

constexpr double kMaxDiscreteCandidates = 4194304.0; // 2^22
constexpr double kMaxOracleEvaluations = 1e7;

// Product over users of (1 + B_v * |accessible_v|): the raw candidate-mask count.
double discrete_candidate_count(const Scenario &s);

// Visits every (omega, phi) satisfying the per-user, per-(BS, subchannel) and
// association constraints, in a fixed order. Powers and phases are zero.
void for_each_discrete(const Scenario &s, const std::function<void(const Allocation &)> &visit);
std::vector<Allocation> enumerate_discrete(const Scenario &s);

// Each BS splits P_max evenly over its scheduled links.
void assign_uniform_power(const Scenario &s, Allocation &alloc);

// Scheduled links of a fixed discrete configuration, with everything the reward
// needs as a function of the power vector alone.
class PowerModel {
public:
    PowerModel(const Scenario &s, const LinkGains &gains, const Allocation &alloc);

    int size() const { return static_cast<int>(links_.size()); }
    const std::vector<std::size_t> &links() const { return links_; } // Allocation link indices
    const std::vector<int> &bs_of_link() const { return bs_; }

    std::vector<double> rates(const std::vector<double> &p) const;
    // sum_utility - qos_penalty, identical to utility_breakdown(...).reward().
    double reward(const std::vector<double> &p) const;
    // reward with the QoS hinge restricted to scheduled users and weighted by `qos_weight`.
    double objective(const std::vector<double> &p, double qos_weight) const;
    bool qos_met(const std::vector<double> &p, double tol = 1e-9) const;

    std::vector<double> gather(const Allocation &alloc) const;
    void scatter(const std::vector<double> &p, Allocation &alloc) const;

    // Euclidean projection onto {0 <= p <= P_max, per-BS sum <= P_max}.
    std::vector<double> project(const std::vector<double> &p) const;

    // Taylor-bounded surrogate at `anchor` and its gradient.
    double surrogate(const std::vector<double> &p, const std::vector<double> &anchor, double qos_weight,
                     std::vector<double> *grad) const;

private:
    double interference(int i, const std::vector<double> &p) const;
    double utility_from_rates(const std::vector<double> &rates, const std::vector<double> &p, double qos_weight,
                              bool all_users) const;

    const Scenario *s_;
    std::vector<std::size_t> links_;
    std::vector<int> bs_, vsp_, user_;
    std::vector<double> gain_;  // size()^2, gain_[i * n + j] = gain from link j's BS at link i's receiver
    std::vector<double> mask_;  // 1 where link j interferes with link i
    double fixed_cost_ = 0.0;   // Phi2 * (spectrum + RIS costs)
    double unscheduled_penalty_ = 0.0;
};

struct ScaOptions {
    int max_iterations = 30;
    double tolerance = 1e-6;
    int max_escalations = 5;
    double escalation_factor = 10.0;
    int inner_iterations = 500;
    // eds_solve also refines from starts that give one link per BS this share of
    // the budget, since interference makes the power problem multimodal.
    bool tilted_starts = true;
    double tilt = 0.75;
};

struct ScaStep {
    double qos_weight;
    double surrogate; // surrogate built at the previous iterate, evaluated at the new one
    double penalized; // objective under qos_weight at the new iterate
    double objective; // true reward at the new iterate
};

struct ScaResult {
    Allocation allocation;
    double objective = 0.0;      // reward of the returned allocation
    double start_objective = 0.0; // reward at p0
    int iterations = 0;
    bool infeasible_qos = false;
    std::vector<ScaStep> history;
};

// Refines the powers of `start` (scheduling fixed, powers = p0) by successive convex approximation.
ScaResult sca_refine(const Scenario &s, const LinkGains &gains, const Allocation &start, const ScaOptions &opts = {});
ScaResult sca_refine(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                     const RisAssociation &assoc, const Allocation &start, const ScaOptions &opts = {});

struct EdsResult {
    Allocation allocation;
    UtilityBreakdown breakdown;
    double reward = 0.0;
    double stage1_reward = 0.0;
    std::int64_t config_id = -1; // enumeration index of the stage-1 winner
    std::int64_t configs = 0;
    int iterations = 0;
    bool infeasible_qos = false;
};

// Benchmark phases: all zero.
EdsResult eds_solve(const Scenario &s, const ChannelRealization &real, const RisAssociation &assoc,
                    const ScaOptions &opts = {});
EdsResult eds_solve(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                    const RisAssociation &assoc, const ScaOptions &opts = {});

struct OracleResult {
    Allocation allocation;
    double reward = 0.0;
    std::int64_t evaluations = 0;
};

OracleResult brute_force_oracle(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                                const RisAssociation &assoc, int power_grid);

nlohmann::json to_json(const EdsResult &r, const Scenario &s);

} // namespace risshare
