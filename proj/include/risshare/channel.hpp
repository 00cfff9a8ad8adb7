#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "risshare/rng.hpp"
#include "risshare/topology.hpp"

namespace risshare {

using cplx = std::complex<double>;

// Complex gains for every direct, BS->RIS and RIS->user link on every subchannel.
// RIS element vectors of all RISs are stored back to back (offset Scenario::ris_offset).
class ChannelRealization {
public:
    ChannelRealization() = default;
    ChannelRealization(int subchannels, int num_bs, int num_users, std::vector<int> elements_per_ris);

    int subchannels() const { return subchannels_; }
    int num_bs() const { return num_bs_; }
    int num_users() const { return num_users_; }
    int num_ris() const { return static_cast<int>(elements_.size()); }
    int elements(int j) const { return elements_[j]; }
    int total_elements() const { return total_elements_; }

    cplx &direct(int b, int k, int c) { return direct_[(c * num_bs_ + b) * num_users_ + k]; }
    const cplx &direct(int b, int k, int c) const { return direct_[(c * num_bs_ + b) * num_users_ + k]; }
    cplx &bs_ris(int b, int j, int c, int m) { return bs_ris_[(c * num_bs_ + b) * total_elements_ + offset_[j] + m]; }
    const cplx &bs_ris(int b, int j, int c, int m) const {
        return bs_ris_[(c * num_bs_ + b) * total_elements_ + offset_[j] + m];
    }
    cplx &ris_user(int j, int k, int c, int m) { return ris_user_[(c * num_users_ + k) * total_elements_ + offset_[j] + m]; }
    const cplx &ris_user(int j, int k, int c, int m) const {
        return ris_user_[(c * num_users_ + k) * total_elements_ + offset_[j] + m];
    }

    const std::vector<cplx> &direct_data() const { return direct_; }
    const std::vector<cplx> &bs_ris_data() const { return bs_ris_; }
    const std::vector<cplx> &ris_user_data() const { return ris_user_; }

    bool operator==(const ChannelRealization &) const = default;

private:
    int subchannels_ = 0;
    int num_bs_ = 0;
    int num_users_ = 0;
    int total_elements_ = 0;
    std::vector<int> elements_;
    std::vector<int> offset_;
    std::vector<cplx> direct_;
    std::vector<cplx> bs_ris_;
    std::vector<cplx> ris_user_;
};

// theta[j][m] in [0, 2*pi), shared by all subchannels.
struct RisPhases {
    std::vector<std::vector<double>> theta;

    static RisPhases zeros(const Scenario &scenario);
    bool operator==(const RisPhases &) const = default;
};

// Mean power of each link class, rho * d^-beta.
double direct_link_scale(const Scenario &s, int b, int k);
double bs_ris_link_scale(const Scenario &s, int b, int j);
double ris_user_link_scale(const Scenario &s, int j, int k);

// Draws a realization from substreams of `seed`: one stream per (link class, subchannel).
ChannelRealization draw_channels(const Scenario &scenario, std::uint64_t seed);
ChannelRealization draw_channels(const Scenario &scenario, Rng &rng);

cplx effective_channel(const ChannelRealization &real, const RisPhases &phases, const RisAssociation &assoc,
                       int b, int k, int c);

// Effective gains for every (c, b, k), indexed (c * num_bs + b) * num_users + k.
std::vector<cplx> effective_channel_table(const ChannelRealization &real, const RisPhases &phases,
                                          const RisAssociation &assoc);

// Per-element phases that co-phase every cascade term of user k's associated RIS
// with the direct path from BS b on subchannel c. Other RISs keep zero phase.
RisPhases align_phases_oracle(const ChannelRealization &real, const RisAssociation &assoc, int b, int k, int c);

// Flat CSV dump: link,b,j,k,c,m,re,im (unused indices are -1).
void write_channels_csv(std::ostream &out, const ChannelRealization &real);
ChannelRealization read_channels_csv(std::istream &in, int subchannels, int num_bs, int num_users,
                                     std::vector<int> elements_per_ris);

} // namespace risshare
