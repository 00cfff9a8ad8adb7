#include "risshare/channel.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "risshare/errors.hpp"
#include "risshare/rng.hpp"

namespace risshare {

namespace {

enum LinkClass : std::uint64_t { kDirect = 1, kBsRis = 2, kRisUser = 3 };

double checked_distance(Point a, Point b, const char *what) {
    const double d = distance(a, b);
    if (!(d > 0.0)) throw DegenerateGeometry(std::string("colocated endpoints on a ") + what + " link");
    return d;
}

} // namespace

ChannelRealization::ChannelRealization(int subchannels, int num_bs, int num_users, std::vector<int> elements_per_ris)
    : subchannels_(subchannels), num_bs_(num_bs), num_users_(num_users), elements_(std::move(elements_per_ris)) {
    offset_.resize(elements_.size());
    for (std::size_t j = 0; j < elements_.size(); ++j) {
        offset_[j] = total_elements_;
        total_elements_ += elements_[j];
    }
    direct_.assign(static_cast<std::size_t>(subchannels_) * num_bs_ * num_users_, cplx{});
    bs_ris_.assign(static_cast<std::size_t>(subchannels_) * num_bs_ * total_elements_, cplx{});
    ris_user_.assign(static_cast<std::size_t>(subchannels_) * num_users_ * total_elements_, cplx{});
}

RisPhases RisPhases::zeros(const Scenario &s) {
    RisPhases p;
    for (int j = 0; j < s.num_ris; ++j) p.theta.emplace_back(s.elements_per_ris[j], 0.0);
    return p;
}

double direct_link_scale(const Scenario &s, int b, int k) {
    const double d = checked_distance(s.bs_pos[b], s.user_pos[k], "BS-user");
    return s.ref_gain * std::pow(d, -s.pathloss_exponent);
}

double bs_ris_link_scale(const Scenario &s, int b, int j) {
    const double d = checked_distance(s.bs_pos[b], s.ris_pos[j], "BS-RIS");
    return s.ref_gain * std::pow(d, -s.pathloss_exponent);
}

double ris_user_link_scale(const Scenario &s, int j, int k) {
    const double d = checked_distance(s.ris_pos[j], s.user_pos[k], "RIS-user");
    return s.ris_hop_gain * std::pow(d, -s.pathloss_exponent);
}

ChannelRealization draw_channels(const Scenario &s, Rng &rng) { return draw_channels(s, rng.next_u64()); }

ChannelRealization draw_channels(const Scenario &s, std::uint64_t seed) {
    const int NB = s.total_bs();
    const int NK = s.total_users();
    ChannelRealization real(s.num_subchannels, NB, NK, s.elements_per_ris);

    std::vector<double> direct_amp(NB * NK), bs_ris_amp(NB * s.num_ris), ris_user_amp(s.num_ris * NK);
    for (int b = 0; b < NB; ++b)
        for (int k = 0; k < NK; ++k) direct_amp[b * NK + k] = std::sqrt(direct_link_scale(s, b, k));
    for (int b = 0; b < NB; ++b)
        for (int j = 0; j < s.num_ris; ++j) bs_ris_amp[b * s.num_ris + j] = std::sqrt(bs_ris_link_scale(s, b, j));
    for (int j = 0; j < s.num_ris; ++j)
        for (int k = 0; k < NK; ++k) ris_user_amp[j * NK + k] = std::sqrt(ris_user_link_scale(s, j, k));

    for (int c = 0; c < s.num_subchannels; ++c) {
        const auto uc = static_cast<std::uint64_t>(c);
        Rng direct_rng = Rng::substream(seed, {kDirect, uc});
        for (int b = 0; b < NB; ++b)
            for (int k = 0; k < NK; ++k) real.direct(b, k, c) = direct_amp[b * NK + k] * direct_rng.complex_normal();

        Rng bs_ris_rng = Rng::substream(seed, {kBsRis, uc});
        for (int b = 0; b < NB; ++b)
            for (int j = 0; j < s.num_ris; ++j)
                for (int m = 0; m < s.elements_per_ris[j]; ++m)
                    real.bs_ris(b, j, c, m) = bs_ris_amp[b * s.num_ris + j] * bs_ris_rng.complex_normal();

        Rng ris_user_rng = Rng::substream(seed, {kRisUser, uc});
        for (int j = 0; j < s.num_ris; ++j)
            for (int k = 0; k < NK; ++k)
                for (int m = 0; m < s.elements_per_ris[j]; ++m)
                    real.ris_user(j, k, c, m) = ris_user_amp[j * NK + k] * ris_user_rng.complex_normal();
    }
    return real;
}

cplx effective_channel(const ChannelRealization &real, const RisPhases &phases, const RisAssociation &assoc, int b,
                       int k, int c) {
    cplx h = real.direct(b, k, c);
    for (int j = 0; j < real.num_ris(); ++j) {
        if (!assoc.d[j][k]) continue;
        cplx cascade{};
        for (int m = 0; m < real.elements(j); ++m)
            cascade += std::conj(real.ris_user(j, k, c, m)) * std::polar(1.0, phases.theta[j][m]) *
                       real.bs_ris(b, j, c, m);
        h += cascade;
    }
    return h;
}

std::vector<cplx> effective_channel_table(const ChannelRealization &real, const RisPhases &phases,
                                          const RisAssociation &assoc) {
    const int C = real.subchannels(), NB = real.num_bs(), NK = real.num_users();
    std::vector<cplx> rotors;
    for (int j = 0; j < real.num_ris(); ++j)
        for (int m = 0; m < real.elements(j); ++m) rotors.push_back(std::polar(1.0, phases.theta[j][m]));

    std::vector<cplx> table(static_cast<std::size_t>(C) * NB * NK);
    std::vector<int> user_ris(NK, -1);
    for (int k = 0; k < NK; ++k) user_ris[k] = assoc.ris_of_user(k);

    // Precompute Theta g per (c, b) once.
    std::vector<cplx> steered(real.total_elements());
    for (int c = 0; c < C; ++c) {
        for (int b = 0; b < NB; ++b) {
            for (int j = 0, e = 0; j < real.num_ris(); ++j)
                for (int m = 0; m < real.elements(j); ++m, ++e) steered[e] = rotors[e] * real.bs_ris(b, j, c, m);
            for (int k = 0; k < NK; ++k) {
                cplx h = real.direct(b, k, c);
                for (int j = 0, base = 0; j < real.num_ris(); base += real.elements(j), ++j) {
                    if (!assoc.d[j][k]) continue;
                    for (int m = 0; m < real.elements(j); ++m) h += std::conj(real.ris_user(j, k, c, m)) * steered[base + m];
                }
                table[(static_cast<std::size_t>(c) * NB + b) * NK + k] = h;
            }
        }
    }
    return table;
}

RisPhases align_phases_oracle(const ChannelRealization &real, const RisAssociation &assoc, int b, int k, int c) {
    const int j = assoc.ris_of_user(k);
    if (j < 0) throw NoRis(k);
    RisPhases p;
    for (int i = 0; i < real.num_ris(); ++i) p.theta.emplace_back(real.elements(i), 0.0);
    const double target = std::arg(real.direct(b, k, c));
    for (int m = 0; m < real.elements(j); ++m) {
        const double cascade = std::arg(std::conj(real.ris_user(j, k, c, m)) * real.bs_ris(b, j, c, m));
        double theta = std::fmod(target - cascade, 2.0 * std::numbers::pi);
        if (theta < 0.0) theta += 2.0 * std::numbers::pi;
        if (theta >= 2.0 * std::numbers::pi) theta = 0.0;
        p.theta[j][m] = theta;
    }
    return p;
}

void write_channels_csv(std::ostream &out, const ChannelRealization &real) {
    out << "link,b,j,k,c,m,re,im\n";
    out << std::setprecision(17);
    for (int c = 0; c < real.subchannels(); ++c)
        for (int b = 0; b < real.num_bs(); ++b)
            for (int k = 0; k < real.num_users(); ++k) {
                const cplx h = real.direct(b, k, c);
                out << "direct," << b << ",-1," << k << ',' << c << ",-1," << h.real() << ',' << h.imag() << '\n';
            }
    for (int c = 0; c < real.subchannels(); ++c)
        for (int b = 0; b < real.num_bs(); ++b)
            for (int j = 0; j < real.num_ris(); ++j)
                for (int m = 0; m < real.elements(j); ++m) {
                    const cplx g = real.bs_ris(b, j, c, m);
                    out << "bs_ris," << b << ',' << j << ",-1," << c << ',' << m << ',' << g.real() << ',' << g.imag() << '\n';
                }
    for (int c = 0; c < real.subchannels(); ++c)
        for (int j = 0; j < real.num_ris(); ++j)
            for (int k = 0; k < real.num_users(); ++k)
                for (int m = 0; m < real.elements(j); ++m) {
                    const cplx r = real.ris_user(j, k, c, m);
                    out << "ris_user,-1," << j << ',' << k << ',' << c << ',' << m << ',' << r.real() << ',' << r.imag() << '\n';
                }
}

ChannelRealization read_channels_csv(std::istream &in, int subchannels, int num_bs, int num_users,
                                     std::vector<int> elements_per_ris) {
    ChannelRealization real(subchannels, num_bs, num_users, std::move(elements_per_ris));
    std::string line;
    if (!std::getline(in, line) || line != "link,b,j,k,c,m,re,im") throw SchemaMismatch("channel CSV header mismatch");
    std::size_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string link, field;
        std::getline(ss, link, ',');
        int idx[5];
        for (int &v : idx) {
            std::getline(ss, field, ',');
            v = std::stoi(field);
        }
        std::getline(ss, field, ',');
        const double re = std::stod(field);
        std::getline(ss, field, ',');
        const double im = std::stod(field);
        const auto [b, j, k, c, m] = idx;
        auto in_range = [](int v, int n) { return v >= 0 && v < n; };
        if (!in_range(c, subchannels)) throw SchemaMismatch("channel CSV: subchannel index out of range");
        if (link == "direct" && in_range(b, num_bs) && in_range(k, num_users)) {
            real.direct(b, k, c) = {re, im};
        } else if (link == "bs_ris" && in_range(b, num_bs) && in_range(j, real.num_ris()) && in_range(m, real.elements(j))) {
            real.bs_ris(b, j, c, m) = {re, im};
        } else if (link == "ris_user" && in_range(j, real.num_ris()) && in_range(k, num_users) &&
                   in_range(m, real.elements(j))) {
            real.ris_user(j, k, c, m) = {re, im};
        } else {
            throw SchemaMismatch("channel CSV: bad row '" + line + "'");
        }
        ++count;
    }
    const std::size_t expected = real.direct_data().size() + real.bs_ris_data().size() + real.ris_user_data().size();
    if (count != expected) throw SchemaMismatch("channel CSV: expected " + std::to_string(expected) + " rows");
    return real;
}

} // namespace risshare
