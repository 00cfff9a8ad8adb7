#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "risshare/channel.hpp"
#include "risshare/phy.hpp"
#include "risshare/rng.hpp"
#include "risshare/topology.hpp"

namespace risshare {

// Raw-action layout: scheduling logits per (v, b, k, accessible c), power
// fractions in the same order, then one phase control per (j, m).
struct ActionLayout {
    struct Link {
        int v, b, k, c; // c is the global subchannel index
    };
    std::vector<Link> links;
    int phase_count = 0;

    int link_count() const { return static_cast<int>(links.size()); }
    int dim() const { return 2 * link_count() + phase_count; }
    int power_offset() const { return link_count(); }
    int phase_offset() const { return 2 * link_count(); }
};

ActionLayout action_layout(const Scenario &scenario);

// Deterministic feasibility projection of a raw action in [-1, 1]^|A|.
Allocation project_action(const Scenario &scenario, const RisAssociation &assoc, std::span<const double> raw);

// Raw action whose projection reproduces `alloc` (bits -> +-1, power -> 2p/Pmax - 1,
// phase -> theta/pi - 1).
std::vector<double> encode_action(const Scenario &scenario, const Allocation &alloc);

struct StateLayout {
    int channel_dim = 0; // interleaved (re, im) of direct, BS->RIS, RIS->user
    int rate_dim = 0;
    int action_dim = 0;
    int dim() const { return channel_dim + rate_dim + action_dim; }
    int rate_offset() const { return channel_dim; }
    int action_offset() const { return channel_dim + rate_dim; }
};

StateLayout state_layout(const Scenario &scenario);

// Executed-action slice of the state: omega bits, p / Pmax, theta / pi - 1.
std::vector<double> encode_executed_action(const Scenario &scenario, const Allocation &alloc);
Allocation decode_executed_action(const Scenario &scenario, std::span<const double> slice);

struct EnvConfig {
    int episode_length = 100;
};

struct StepResult {
    std::vector<double> state;
    double reward = 0.0;
    bool done = false;
    UtilityBreakdown info;
    Allocation allocation;
};

class Environment {
public:
    Environment(Scenario scenario, EnvConfig config, std::uint64_t seed);

    // Fresh small-scale fading (geometry fixed), zero rates and zero previous action.
    const std::vector<double> &reset();
    StepResult step(std::span<const double> raw);

    const Scenario &scenario() const { return scenario_; }
    const RisAssociation &association() const { return assoc_; }
    const ChannelRealization &channels() const { return real_; }
    const ActionLayout &layout() const { return layout_; }
    int state_dim() const { return state_layout_.dim(); }
    int action_dim() const { return layout_.dim(); }
    int episode() const { return episode_; }
    int step_in_episode() const { return step_; }

private:
    void encode_state(const std::vector<double> &rates, const Allocation &prev);

    Scenario scenario_;
    RisAssociation assoc_;
    EnvConfig config_;
    Rng rng_;
    ActionLayout layout_;
    StateLayout state_layout_;
    std::vector<double> channel_scale_; // 1 / sqrt(mean power) per complex channel entry
    ChannelRealization real_;
    std::vector<double> state_;
    bool ready_ = false;
    int episode_ = -1;
    int step_ = 0;
};

} // namespace risshare
