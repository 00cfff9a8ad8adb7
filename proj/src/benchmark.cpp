#include "risshare/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "risshare/errors.hpp"

namespace risshare {

namespace {

double dot(const std::vector<double> &a, const std::vector<double> &b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Projection of y onto {0 <= x <= cap, sum x <= cap}: clip, and if the budget
// binds, shift by the multiplier tau found by bisection.
void project_capped_simplex(std::vector<double> &y, double cap) {
    auto clipped_sum = [&](double tau) {
        double s = 0.0;
        for (double v : y) s += std::clamp(v - tau, 0.0, cap);
        return s;
    };
    if (clipped_sum(0.0) <= cap) {
        for (double &v : y) v = std::clamp(v, 0.0, cap);
        return;
    }
    double lo = 0.0, hi = *std::max_element(y.begin(), y.end());
    for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (clipped_sum(mid) > cap ? lo : hi) = mid;
    }
    for (double &v : y) v = std::clamp(v - hi, 0.0, cap);
}

} // namespace

double discrete_candidate_count(const Scenario &s) {
    double n = 1.0;
    for (int v = 0; v < s.num_vsps; ++v)
        n *= std::pow(1.0 + s.bs_per_vsp * static_cast<double>(s.accessible[v].size()), s.users_per_vsp);
    return n;
}

void for_each_discrete(const Scenario &s, const std::function<void(const Allocation &)> &visit) {
    const double count = discrete_candidate_count(s);
    if (count > kMaxDiscreteCandidates) throw SearchSpaceTooLarge(count, kMaxDiscreteCandidates);

    Allocation a = Allocation::empty(s);
    std::vector<int> load(static_cast<std::size_t>(s.total_bs()) * s.num_subchannels, 0);
    const int NK = s.total_users();

    auto rec = [&](auto &self, int gk) -> void {
        if (gk == NK) {
            visit(a);
            return;
        }
        self(self, gk + 1);
        const int v = s.vsp_of_user(gk), k = gk % s.users_per_vsp;
        for (int b = 0; b < s.bs_per_vsp; ++b) {
            const int gb = s.bs_index(v, b);
            for (int c : s.accessible[v]) {
                int &l = load[static_cast<std::size_t>(gb) * s.num_subchannels + c];
                if (l >= s.max_users_per_subchannel) continue;
                ++l;
                a.omega[a.link(gb, k, c)] = 1;
                a.phi[a.assoc(gb, k)] = 1;
                self(self, gk + 1);
                a.omega[a.link(gb, k, c)] = 0;
                a.phi[a.assoc(gb, k)] = 0;
                --l;
            }
        }
    };
    rec(rec, 0);
}

std::vector<Allocation> enumerate_discrete(const Scenario &s) {
    std::vector<Allocation> out;
    for_each_discrete(s, [&](const Allocation &a) { out.push_back(a); });
    return out;
}

void assign_uniform_power(const Scenario &s, Allocation &a) {
    const int K = s.users_per_vsp, C = s.num_subchannels;
    for (int gb = 0; gb < s.total_bs(); ++gb) {
        int active = 0;
        for (int k = 0; k < K; ++k)
            for (int c = 0; c < C; ++c) active += a.omega[a.link(gb, k, c)];
        for (int k = 0; k < K; ++k)
            for (int c = 0; c < C; ++c) {
                const auto l = a.link(gb, k, c);
                a.power[l] = a.omega[l] ? s.p_max / active : 0.0;
            }
    }
}

// ---------------------------------------------------------------- power model

PowerModel::PowerModel(const Scenario &s, const LinkGains &gains, const Allocation &alloc) : s_(&s) {
    const int K = s.users_per_vsp, C = s.num_subchannels;
    std::vector<int> channel;
    for (int gb = 0; gb < s.total_bs(); ++gb)
        for (int k = 0; k < K; ++k)
            for (int c = 0; c < C; ++c) {
                const auto l = alloc.link(gb, k, c);
                if (!alloc.omega[l]) continue;
                links_.push_back(l);
                bs_.push_back(gb);
                vsp_.push_back(s.vsp_of_bs(gb));
                user_.push_back(s.user_index(s.vsp_of_bs(gb), k));
                channel.push_back(c);
            }
    const int n = size();
    gain_.assign(static_cast<std::size_t>(n) * n, 0.0);
    mask_.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (channel[i] != channel[j]) continue;
            gain_[i * n + j] = gains(bs_[j], user_[i], channel[i]);
            if (i != j && (vsp_[i] == vsp_[j] || s.reuse_flag[channel[i]])) mask_[i * n + j] = 1.0;
        }

    Allocation idle = alloc;
    std::fill(idle.power.begin(), idle.power.end(), 0.0);
    const UtilityBreakdown u = utility_breakdown(s, gains, idle);
    for (int v = 0; v < s.num_vsps; ++v) fixed_cost_ += s.phi2 * (u.spectrum_cost[v] + u.ris_cost[v]);
    std::vector<char> scheduled(s.total_users(), 0);
    for (int gk : user_) scheduled[gk] = 1;
    for (int gk = 0; gk < s.total_users(); ++gk)
        if (!scheduled[gk]) unscheduled_penalty_ += s.qos_penalty_weight * std::max(0.0, s.rate_threshold[gk]);
}

double PowerModel::interference(int i, const std::vector<double> &p) const {
    const int n = size();
    double x = 0.0;
    for (int j = 0; j < n; ++j)
        if (mask_[i * n + j] != 0.0) x += p[j] * gain_[i * n + j];
    return x;
}

std::vector<double> PowerModel::rates(const std::vector<double> &p) const {
    const int n = size();
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i) {
        const double sinr = p[i] * gain_[i * n + i] / (interference(i, p) + s_->noise_power);
        r[i] = rate_from_sinr(s_->bandwidth, sinr);
    }
    return r;
}

double PowerModel::utility_from_rates(const std::vector<double> &r, const std::vector<double> &p, double qos_weight,
                                      bool all_users) const {
    const Scenario &s = *s_;
    double value = -fixed_cost_;
    double total_power = 0.0;
    for (int i = 0; i < size(); ++i) {
        value += s.phi1 * s.profit_per_rate[vsp_[i]] * r[i];
        value -= qos_weight * std::max(0.0, s.rate_threshold[user_[i]] - r[i]);
        total_power += p[i];
    }
    value -= s.phi2 * s.prices.power * s.bandwidth * total_power;
    if (all_users) value -= unscheduled_penalty_;
    return value;
}

double PowerModel::reward(const std::vector<double> &p) const {
    return utility_from_rates(rates(p), p, s_->qos_penalty_weight, true);
}

double PowerModel::objective(const std::vector<double> &p, double qos_weight) const {
    return utility_from_rates(rates(p), p, qos_weight, true);
}

bool PowerModel::qos_met(const std::vector<double> &p, double tol) const {
    const auto r = rates(p);
    for (int i = 0; i < size(); ++i)
        if (r[i] < s_->rate_threshold[user_[i]] - tol) return false;
    return true;
}

std::vector<double> PowerModel::gather(const Allocation &alloc) const {
    std::vector<double> p(size());
    for (int i = 0; i < size(); ++i) p[i] = alloc.power[links_[i]];
    return p;
}

void PowerModel::scatter(const std::vector<double> &p, Allocation &alloc) const {
    for (int i = 0; i < size(); ++i) alloc.power[links_[i]] = p[i];
}

std::vector<double> PowerModel::project(const std::vector<double> &p) const {
    std::vector<double> out(p);
    std::vector<int> bs_ids(bs_);
    std::sort(bs_ids.begin(), bs_ids.end());
    bs_ids.erase(std::unique(bs_ids.begin(), bs_ids.end()), bs_ids.end());
    for (int gb : bs_ids) {
        std::vector<double> y;
        for (int i = 0; i < size(); ++i)
            if (bs_[i] == gb) y.push_back(p[i]);
        project_capped_simplex(y, s_->p_max);
        for (int i = 0, r = 0; i < size(); ++i)
            if (bs_[i] == gb) out[i] = y[r++];
    }
    return out;
}

double PowerModel::surrogate(const std::vector<double> &p, const std::vector<double> &anchor, double qos_weight,
                             std::vector<double> *grad) const {
    const Scenario &s = *s_;
    const int n = size();
    const double scale = s.bandwidth / std::numbers::ln2;
    std::vector<double> r(n);
    std::vector<double> total(n), anchor_ifn(n);
    for (int i = 0; i < n; ++i) {
        const double ifn_p = interference(i, p) + s.noise_power;
        const double ifn_a = interference(i, anchor) + s.noise_power;
        total[i] = ifn_p + p[i] * gain_[i * n + i];
        anchor_ifn[i] = ifn_a;
        // log(S(p)) - [log(I(a)) + (I(p) - I(a)) / I(a)]
        r[i] = scale * (std::log(total[i]) - std::log(ifn_a) - (ifn_p - ifn_a) / ifn_a);
    }
    const double value = utility_from_rates(r, p, qos_weight, true);
    if (grad) {
        grad->assign(n, -s.phi2 * s.prices.power * s.bandwidth);
        for (int i = 0; i < n; ++i) {
            double w = s.phi1 * s.profit_per_rate[vsp_[i]];
            if (r[i] < s.rate_threshold[user_[i]]) w += qos_weight;
            for (int j = 0; j < n; ++j) {
                const double g = gain_[i * n + j];
                if (j == i)
                    (*grad)[j] += w * scale * g / total[i];
                else if (mask_[i * n + j] != 0.0)
                    (*grad)[j] += w * scale * g * (1.0 / total[i] - 1.0 / anchor_ifn[i]);
            }
        }
    }
    return value;
}

// ---------------------------------------------------------------- SCA

namespace {

// Projected-gradient ascent with backtracking on the concave surrogate built at `anchor`.
std::vector<double> maximize_surrogate(const PowerModel &m, const std::vector<double> &anchor, double qos_weight,
                                       double p_max, int max_iter) {
    std::vector<double> p = anchor, g, q(p.size()), d(p.size());
    double f = m.surrogate(p, anchor, qos_weight, &g);
    double gmax = 0.0;
    for (double x : g) gmax = std::max(gmax, std::abs(x));
    if (gmax == 0.0 || p.empty()) return p;
    double t = std::max(p_max, 1e-12) / gmax;

    for (int it = 0; it < max_iter; ++it) {
        bool accepted = false;
        double fq = f;
        while (t > 1e-300) {
            for (std::size_t i = 0; i < p.size(); ++i) q[i] = p[i] + t * g[i];
            q = m.project(q);
            for (std::size_t i = 0; i < p.size(); ++i) d[i] = q[i] - p[i];
            const double dd = dot(d, d);
            if (dd == 0.0) return p;
            fq = m.surrogate(q, anchor, qos_weight, nullptr);
            if (fq >= f && fq >= f + dot(g, d) - dd / (2.0 * t)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        double step = 0.0;
        for (double x : d) step = std::max(step, std::abs(x));
        p = q;
        f = m.surrogate(p, anchor, qos_weight, &g);
        if (step < 1e-13 * std::max(1.0, p_max)) break;
        t *= 2.0;
    }
    return p;
}

} // namespace

ScaResult sca_refine(const Scenario &s, const LinkGains &gains, const Allocation &start, const ScaOptions &opts) {
    const PowerModel m(s, gains, start);
    ScaResult res;
    std::vector<double> p = m.project(m.gather(start));
    res.start_objective = m.reward(m.gather(start));
    std::vector<double> best = p;
    double best_reward = m.reward(p);

    double weight = s.qos_penalty_weight;
    for (int e = 0; e <= opts.max_escalations; ++e) {
        double current = m.objective(p, weight);
        for (int n = 0; n < opts.max_iterations; ++n) {
            const std::vector<double> anchor = p;
            p = maximize_surrogate(m, anchor, weight, s.p_max, opts.inner_iterations);
            const double next = m.objective(p, weight);
            const double r = m.reward(p);
            res.history.push_back({weight, m.surrogate(p, anchor, weight, nullptr), next, r});
            ++res.iterations;
            if (r > best_reward) {
                best_reward = r;
                best = p;
            }
            const bool done = std::abs(next - current) < opts.tolerance;
            current = next;
            if (done) break;
        }
        if (m.qos_met(p) || weight <= 0.0 || e == opts.max_escalations) break;
        weight *= opts.escalation_factor;
    }
    res.infeasible_qos = !m.qos_met(p);

    res.allocation = start;
    m.scatter(best, res.allocation);
    res.objective = best_reward;
    return res;
}

ScaResult sca_refine(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                     const RisAssociation &assoc, const Allocation &start, const ScaOptions &opts) {
    Allocation a = start;
    a.phases = phases;
    return sca_refine(s, LinkGains(real, phases, assoc), a, opts);
}

// ---------------------------------------------------------------- EDS

namespace {

// Power vectors where one link of a BS holds `tilt` of the budget and its
// siblings share the rest. Two families: one BS tilted at a time (towards each
// of its links), and every BS tilted towards its r-th link at once.
std::vector<std::vector<double>> tilted_starts(const Scenario &s, const PowerModel &m, double tilt) {
    const int n = m.size();
    const auto &bs = m.bs_of_link();
    std::vector<int> count(s.total_bs(), 0), rank(n);
    for (int i = 0; i < n; ++i) rank[i] = count[bs[i]]++;
    const int widest = n ? *std::max_element(count.begin(), count.end()) : 0;

    auto fill = [&](const std::function<int(int)> &target) {
        std::vector<double> p(n);
        for (int i = 0; i < n; ++i) {
            const int c = count[bs[i]], t = target(bs[i]);
            if (c == 1 || t < 0 || t >= c) p[i] = s.p_max / c;
            else p[i] = rank[i] == t ? tilt * s.p_max : (1.0 - tilt) * s.p_max / (c - 1);
        }
        return p;
    };
    std::vector<std::vector<double>> starts;
    for (int i = 0; i < n; ++i)
        if (count[bs[i]] > 1) starts.push_back(fill([&](int b) { return b == bs[i] ? rank[i] : -1; }));
    if (std::count_if(count.begin(), count.end(), [](int c) { return c > 1; }) > 1)
        for (int r = 0; r < widest; ++r) starts.push_back(fill([r](int) { return r; }));
    return starts;
}

} // namespace

EdsResult eds_solve(const Scenario &s, const ChannelRealization &real, const RisAssociation &assoc,
                    const ScaOptions &opts) {
    return eds_solve(s, real, RisPhases::zeros(s), assoc, opts);
}

EdsResult eds_solve(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                    const RisAssociation &assoc, const ScaOptions &opts) {
    const LinkGains gains(real, phases, assoc);
    EdsResult res;
    Allocation winner;
    double best = -std::numeric_limits<double>::infinity();
    std::int64_t id = 0;
    for_each_discrete(s, [&](const Allocation &candidate) {
        Allocation a = candidate;
        a.phases = phases;
        assign_uniform_power(s, a);
        const double r = utility_breakdown(s, gains, a).reward();
        if (r > best) {
            best = r;
            winner = std::move(a);
            res.config_id = id;
        }
        ++id;
    });
    res.configs = id;
    res.stage1_reward = best;

    ScaResult sca = sca_refine(s, gains, winner, opts);
    if (opts.tilted_starts) {
        for (const auto &p0 : tilted_starts(s, PowerModel(s, gains, winner), opts.tilt)) {
            Allocation start = winner;
            PowerModel(s, gains, winner).scatter(p0, start);
            ScaResult alt = sca_refine(s, gains, start, opts);
            if (alt.objective > sca.objective) {
                alt.iterations += sca.iterations;
                sca = std::move(alt);
            } else {
                sca.iterations += alt.iterations;
            }
        }
    }
    res.allocation = sca.allocation;
    res.breakdown = utility_breakdown(s, gains, res.allocation);
    res.reward = res.breakdown.reward();
    res.iterations = sca.iterations;
    res.infeasible_qos = sca.infeasible_qos;
    return res;
}

// ---------------------------------------------------------------- oracle

OracleResult brute_force_oracle(const Scenario &s, const ChannelRealization &real, const RisPhases &phases,
                                const RisAssociation &assoc, int power_grid) {
    if (power_grid < 2) throw InvalidConfig("power_grid", "must be >= 2");
    double evaluations = 0.0;
    for_each_discrete(s, [&](const Allocation &a) {
        int links = 0;
        for (auto w : a.omega) links += w;
        evaluations += std::pow(static_cast<double>(power_grid), links);
    });
    if (evaluations > kMaxOracleEvaluations) throw SearchSpaceTooLarge(evaluations, kMaxOracleEvaluations);

    const LinkGains gains(real, phases, assoc);
    OracleResult res;
    res.reward = -std::numeric_limits<double>::infinity();
    std::vector<double> levels(power_grid);
    for (int i = 0; i < power_grid; ++i) levels[i] = s.p_max * i / (power_grid - 1);

    for_each_discrete(s, [&](const Allocation &candidate) {
        const PowerModel m(s, gains, candidate);
        const int n = m.size();
        std::vector<int> digit(n, 0);
        std::vector<double> p(n, 0.0), bs_power(s.total_bs());
        while (true) {
            std::fill(bs_power.begin(), bs_power.end(), 0.0);
            for (int i = 0; i < n; ++i) {
                p[i] = levels[digit[i]];
                bs_power[m.bs_of_link()[i]] += p[i];
            }
            bool feasible = true;
            for (double x : bs_power) feasible = feasible && x <= s.p_max * (1.0 + 1e-12);
            if (feasible) {
                ++res.evaluations;
                const double r = m.reward(p);
                if (r > res.reward) {
                    res.reward = r;
                    res.allocation = candidate;
                    res.allocation.phases = phases;
                    m.scatter(p, res.allocation);
                }
            }
            int i = 0;
            while (i < n && ++digit[i] == power_grid) digit[i++] = 0;
            if (i == n) break;
        }
    });
    return res;
}

nlohmann::json to_json(const EdsResult &r, const Scenario &s) {
    nlohmann::json powers = nlohmann::json::array();
    const int K = s.users_per_vsp;
    for (int gb = 0; gb < s.total_bs(); ++gb)
        for (int k = 0; k < K; ++k)
            for (int c = 0; c < s.num_subchannels; ++c) {
                const auto l = r.allocation.link(gb, k, c);
                if (!r.allocation.omega[l]) continue;
                powers.push_back({{"bs", gb}, {"user", s.user_index(s.vsp_of_bs(gb), k)}, {"subchannel", c},
                                  {"power", r.allocation.power[l]}});
            }
    return {{"config_id", r.config_id},
            {"configs", r.configs},
            {"stage1_reward", r.stage1_reward},
            {"stage2_reward", r.reward},
            {"sum_utility", r.breakdown.sum_utility},
            {"qos_penalty", r.breakdown.qos_penalty},
            {"sum_rate", r.breakdown.sum_rate},
            {"iterations", r.iterations},
            {"infeasible_qos", r.infeasible_qos},
            {"powers", powers}};
}

} // namespace risshare
