#include "risshare/env.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "risshare/errors.hpp"

namespace risshare {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double unit_interval(double x) { return std::clamp((x + 1.0) / 2.0, 0.0, 1.0); }

double phase_from_control(double x) {
    double theta = std::numbers::pi * (std::clamp(x, -1.0, 1.0) + 1.0);
    if (theta >= kTwoPi) theta -= kTwoPi;
    return theta;
}

void derive_association(const Scenario &s, Allocation &a) {
    std::fill(a.phi.begin(), a.phi.end(), 0);
    for (int gb = 0; gb < s.total_bs(); ++gb)
        for (int k = 0; k < s.users_per_vsp; ++k)
            for (int c = 0; c < s.num_subchannels; ++c)
                if (a.omega[a.link(gb, k, c)]) a.phi[a.assoc(gb, k)] = 1;
}

} // namespace

ActionLayout action_layout(const Scenario &s) {
    ActionLayout layout;
    for (int v = 0; v < s.num_vsps; ++v)
        for (int b = 0; b < s.bs_per_vsp; ++b)
            for (int k = 0; k < s.users_per_vsp; ++k)
                for (int c : s.accessible[v]) layout.links.push_back({v, b, k, c});
    layout.phase_count = s.total_ris_elements();
    return layout;
}

Allocation project_action(const Scenario &s, const RisAssociation &, std::span<const double> raw) {
    const ActionLayout layout = action_layout(s);
    if (raw.size() != static_cast<std::size_t>(layout.dim())) throw DimensionMismatch(layout.dim(), raw.size());
    const int n = layout.link_count();
    Allocation a = Allocation::empty(s);

    std::vector<double> score(n);
    for (int i = 0; i < n; ++i) score[i] = unit_interval(raw[i]);

    // One (b, c) per user: the highest pre-threshold score among entries that pass.
    std::vector<int> best(s.total_users(), -1);
    for (int i = 0; i < n; ++i) {
        if (score[i] < 0.5) continue;
        const auto &l = layout.links[i];
        int &cur = best[s.user_index(l.v, l.k)];
        if (cur < 0 || score[i] > score[cur]) cur = i;
    }

    // At most L_c users per (BS, subchannel), keeping the highest scores.
    std::map<std::pair<int, int>, std::vector<int>> per_channel;
    for (int gk = 0; gk < s.total_users(); ++gk) {
        const int i = best[gk];
        if (i < 0) continue;
        const auto &l = layout.links[i];
        per_channel[{s.bs_index(l.v, l.b), l.c}].push_back(i);
    }
    for (auto &[key, members] : per_channel) {
        std::stable_sort(members.begin(), members.end(), [&](int x, int y) {
            if (score[x] != score[y]) return score[x] > score[y];
            return x < y;
        });
        const std::size_t keep = std::min<std::size_t>(members.size(), s.max_users_per_subchannel);
        for (std::size_t r = 0; r < keep; ++r) {
            const auto &l = layout.links[members[r]];
            a.omega[a.link(key.first, l.k, l.c)] = 1;
        }
    }
    derive_association(s, a);

    std::vector<double> bs_power(s.total_bs(), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto &l = layout.links[i];
        const int gb = s.bs_index(l.v, l.b);
        const auto idx = a.link(gb, l.k, l.c);
        if (!a.omega[idx]) continue;
        a.power[idx] = unit_interval(raw[layout.power_offset() + i]) * s.p_max;
        bs_power[gb] += a.power[idx];
    }
    for (int i = 0; i < n; ++i) {
        const auto &l = layout.links[i];
        const int gb = s.bs_index(l.v, l.b);
        if (bs_power[gb] > s.p_max) a.power[a.link(gb, l.k, l.c)] *= s.p_max / bs_power[gb];
    }

    for (int j = 0, e = 0; j < s.num_ris; ++j)
        for (int m = 0; m < s.elements_per_ris[j]; ++m, ++e)
            a.phases.theta[j][m] = phase_from_control(raw[layout.phase_offset() + e]);
    return a;
}

std::vector<double> encode_action(const Scenario &s, const Allocation &a) {
    const ActionLayout layout = action_layout(s);
    std::vector<double> raw(layout.dim(), -1.0);
    for (int i = 0; i < layout.link_count(); ++i) {
        const auto &l = layout.links[i];
        const auto idx = a.link(s.bs_index(l.v, l.b), l.k, l.c);
        if (!a.omega[idx]) continue;
        raw[i] = 1.0;
        raw[layout.power_offset() + i] = std::clamp(2.0 * a.power[idx] / s.p_max - 1.0, -1.0, 1.0);
    }
    for (int j = 0, e = 0; j < s.num_ris; ++j)
        for (int m = 0; m < s.elements_per_ris[j]; ++m, ++e)
            raw[layout.phase_offset() + e] = a.phases.theta[j][m] / std::numbers::pi - 1.0;
    return raw;
}

StateLayout state_layout(const Scenario &s) {
    StateLayout st;
    const int C = s.num_subchannels, NB = s.total_bs(), NK = s.total_users(), M = s.total_ris_elements();
    st.channel_dim = 2 * (C * NB * NK + C * NB * M + C * NK * M);
    st.rate_dim = NK;
    st.action_dim = action_layout(s).dim();
    return st;
}

std::vector<double> encode_executed_action(const Scenario &s, const Allocation &a) {
    const ActionLayout layout = action_layout(s);
    std::vector<double> out(layout.dim(), 0.0);
    for (int i = 0; i < layout.link_count(); ++i) {
        const auto &l = layout.links[i];
        const auto idx = a.link(s.bs_index(l.v, l.b), l.k, l.c);
        out[i] = a.omega[idx];
        out[layout.power_offset() + i] = a.power[idx] / s.p_max;
    }
    for (int j = 0, e = 0; j < s.num_ris; ++j)
        for (int m = 0; m < s.elements_per_ris[j]; ++m, ++e)
            out[layout.phase_offset() + e] = a.phases.theta[j][m] / std::numbers::pi - 1.0;
    return out;
}

Allocation decode_executed_action(const Scenario &s, std::span<const double> slice) {
    const ActionLayout layout = action_layout(s);
    if (slice.size() != static_cast<std::size_t>(layout.dim())) throw DimensionMismatch(layout.dim(), slice.size());
    Allocation a = Allocation::empty(s);
    for (int i = 0; i < layout.link_count(); ++i) {
        const auto &l = layout.links[i];
        const auto idx = a.link(s.bs_index(l.v, l.b), l.k, l.c);
        a.omega[idx] = slice[i] > 0.5 ? 1 : 0;
        a.power[idx] = a.omega[idx] ? slice[layout.power_offset() + i] * s.p_max : 0.0;
    }
    derive_association(s, a);
    for (int j = 0, e = 0; j < s.num_ris; ++j)
        for (int m = 0; m < s.elements_per_ris[j]; ++m, ++e)
            a.phases.theta[j][m] = phase_from_control(slice[layout.phase_offset() + e]);
    return a;
}

Environment::Environment(Scenario scenario, EnvConfig config, std::uint64_t seed)
    : scenario_(std::move(scenario)), assoc_(fix_ris_association(scenario_)), config_(config), rng_(seed),
      layout_(action_layout(scenario_)), state_layout_(state_layout(scenario_)) {
    if (config_.episode_length < 1) throw InvalidConfig("episode_length", "must be >= 1");
    const Scenario &s = scenario_;
    const int C = s.num_subchannels, NB = s.total_bs(), NK = s.total_users();
    channel_scale_.reserve(state_layout_.channel_dim / 2);
    for (int c = 0; c < C; ++c)
        for (int b = 0; b < NB; ++b)
            for (int k = 0; k < NK; ++k) channel_scale_.push_back(1.0 / std::sqrt(direct_link_scale(s, b, k)));
    for (int c = 0; c < C; ++c)
        for (int b = 0; b < NB; ++b)
            for (int j = 0; j < s.num_ris; ++j) {
                const double scale = 1.0 / std::sqrt(bs_ris_link_scale(s, b, j));
                for (int m = 0; m < s.elements_per_ris[j]; ++m) channel_scale_.push_back(scale);
            }
    for (int c = 0; c < C; ++c)
        for (int k = 0; k < NK; ++k)
            for (int j = 0; j < s.num_ris; ++j) {
                const double scale = 1.0 / std::sqrt(ris_user_link_scale(s, j, k));
                for (int m = 0; m < s.elements_per_ris[j]; ++m) channel_scale_.push_back(scale);
            }
}

const std::vector<double> &Environment::reset() {
    real_ = draw_channels(scenario_, rng_);
    ++episode_;
    step_ = 0;
    ready_ = true;
    encode_state(std::vector<double>(scenario_.total_users(), 0.0), Allocation::empty(scenario_));
    return state_;
}

void Environment::encode_state(const std::vector<double> &rates, const Allocation &prev) {
    state_.assign(state_layout_.dim(), 0.0);
    std::size_t e = 0, out = 0;
    auto put = [&](const std::vector<cplx> &data) {
        for (const cplx &h : data) {
            state_[out++] = h.real() * channel_scale_[e];
            state_[out++] = h.imag() * channel_scale_[e];
            ++e;
        }
    };
    put(real_.direct_data());
    put(real_.bs_ris_data());
    put(real_.ris_user_data());
    for (double r : rates) state_[out++] = r / scenario_.bandwidth;
    for (double x : encode_executed_action(scenario_, prev)) state_[out++] = x;
}

StepResult Environment::step(std::span<const double> raw) {
    if (!ready_) throw NotReset();
    StepResult result;
    result.allocation = project_action(scenario_, assoc_, raw);
    const LinkGains gains(real_, result.allocation.phases, assoc_);
    result.info = utility_breakdown(scenario_, gains, result.allocation);
    result.reward = result.info.reward();
    ++step_;
    result.done = step_ >= config_.episode_length;
    if (result.done) ready_ = false;
    encode_state(result.info.user_rate, result.allocation);
    result.state = state_;
    return result;
}

} // namespace risshare
