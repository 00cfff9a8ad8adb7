#pragma once

#include <cmath>
#include <vector>

#include "risshare/channel.hpp"
#include "risshare/env.hpp"
#include "risshare/phy.hpp"
#include "risshare/rng.hpp"
#include "risshare/topology.hpp"

namespace testing {

using namespace risshare;

struct Shape {
    int vsps = 2, bs = 1, users = 2, reusable = 1, dedicated = 1, l_c = 2, ris = 1, elements = 4;
};

inline ScenarioConfig config_for(const Shape &sh, std::uint64_t seed = 1) {
    ScenarioConfig c;
    c.vsps = sh.vsps;
    c.bs_per_vsp = sh.bs;
    c.users_per_vsp = sh.users;
    c.reusable_count = sh.reusable;
    c.dedicated_count = sh.dedicated;
    c.subchannels = sh.reusable + sh.dedicated;
    c.l_c = sh.l_c;
    c.ris_count = sh.ris;
    c.ris_elements = sh.ris ? std::vector<int>{sh.elements} : std::vector<int>{};
    c.ris_owner = sh.ris ? std::vector<int>{0} : std::vector<int>{};
    c.seed = seed;
    return c;
}

inline Scenario scenario_for(const Shape &sh, std::uint64_t seed = 1) { return build_scenario(config_for(sh, seed)); }

// Random shape small enough for exhaustive loops.
inline Shape random_shape(Rng &rng) {
    Shape sh;
    sh.vsps = 1 + static_cast<int>(rng.below(2));
    sh.bs = 1 + static_cast<int>(rng.below(2));
    sh.users = 1 + static_cast<int>(rng.below(3));
    sh.reusable = static_cast<int>(rng.below(3));
    sh.dedicated = 1 + static_cast<int>(rng.below(2));
    sh.l_c = 1 + static_cast<int>(rng.below(2));
    sh.ris = static_cast<int>(rng.below(2));
    sh.elements = 1 + static_cast<int>(rng.below(4));
    return sh;
}

inline std::vector<double> random_raw(int dim, Rng &rng, double spread = 1.0) {
    std::vector<double> x(dim);
    for (auto &v : x) v = rng.uniform(-spread, spread);
    return x;
}

inline RisPhases random_phases(const Scenario &s, Rng &rng) {
    RisPhases p = RisPhases::zeros(s);
    for (auto &row : p.theta)
        for (auto &t : row) t = rng.uniform(0.0, 2.0 * M_PI);
    return p;
}

// |h~|^2 straight from the raw channel arrays.
inline double gain_oracle(const ChannelRealization &real, const RisPhases &ph, const RisAssociation &assoc, int gb,
                          int gk, int c) {
    double re = real.direct(gb, gk, c).real(), im = real.direct(gb, gk, c).imag();
    for (int j = 0; j < real.num_ris(); ++j) {
        if (!assoc.d[j][gk]) continue;
        for (int m = 0; m < real.elements(j); ++m) {
            const auto r = real.ris_user(j, gk, c, m), g = real.bs_ris(gb, j, c, m);
            // conj(r) * e^{i theta} * g, expanded by hand
            const double ar = r.real(), ai = -r.imag(), cr = std::cos(ph.theta[j][m]), ci = std::sin(ph.theta[j][m]);
            const double pr = ar * cr - ai * ci, pi = ar * ci + ai * cr;
            re += pr * g.real() - pi * g.imag();
            im += pr * g.imag() + pi * g.real();
        }
    }
    return re * re + im * im;
}

// Flat loop over every other active link on subchannel c.
inline double interference_oracle(const Scenario &s, const ChannelRealization &real, const RisPhases &ph,
                                  const RisAssociation &assoc, const Allocation &a, int v, int b, int k, int c) {
    const int gb = s.bs_index(v, b), gk = s.user_index(v, k);
    double total = 0.0;
    for (int gb2 = 0; gb2 < s.total_bs(); ++gb2)
        for (int k2 = 0; k2 < s.users_per_vsp; ++k2) {
            if (gb2 == gb && k2 == k) continue;
            const auto l = a.link(gb2, k2, c);
            if (!a.omega[l]) continue;
            const bool same_vsp = s.vsp_of_bs(gb2) == v;
            if (!same_vsp && !s.reuse_flag[c]) continue;
            total += a.power[l] * gain_oracle(real, ph, assoc, gb2, gk, c);
        }
    return total;
}

inline double rate_oracle(const Scenario &s, const ChannelRealization &real, const RisPhases &ph,
                          const RisAssociation &assoc, const Allocation &a, int v, int b, int k, int c) {
    const auto l = a.link(s.bs_index(v, b), k, c);
    if (!a.omega[l]) return 0.0;
    const double sig = a.power[l] * gain_oracle(real, ph, assoc, s.bs_index(v, b), s.user_index(v, k), c);
    const double sinr = sig / (interference_oracle(s, real, ph, assoc, a, v, b, k, c) + s.noise_power);
    return s.bandwidth * std::log2(1.0 + sinr);
}

inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

} // namespace testing
