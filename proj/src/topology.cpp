#include "risshare/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include "risshare/errors.hpp"
#include "risshare/rng.hpp"

namespace risshare {

namespace {

using nlohmann::json;

enum StreamTag : std::uint64_t { kBsPositions = 0xB5, kUserPositions = 0x05E2, kRisPositions = 0x215 };

const json *find_path(const json &root, const std::string &dotted) {
    const json *node = &root;
    std::size_t start = 0;
    while (start <= dotted.size()) {
        const auto dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object()) return nullptr;
        auto it = node->find(key);
        if (it == node->end()) return nullptr;
        node = &*it;
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return node;
}

int get_int(const json &root, const std::string &key, int fallback) {
    const json *n = find_path(root, key);
    if (!n) return fallback;
    if (!n->is_number_integer()) throw InvalidConfig(key, "expected an integer");
    return n->get<int>();
}

double get_double(const json &root, const std::string &key, double fallback) {
    const json *n = find_path(root, key);
    if (!n) return fallback;
    if (!n->is_number()) throw InvalidConfig(key, "expected a number");
    return n->get<double>();
}

std::vector<int> int_list(const json &n, const std::string &key) {
    if (!n.is_array()) throw InvalidConfig(key, "expected a list of integers");
    std::vector<int> out;
    for (const auto &e : n) {
        if (!e.is_number_integer()) throw InvalidConfig(key, "expected a list of integers");
        out.push_back(e.get<int>());
    }
    return out;
}

std::vector<Point> point_list(const json &root, const std::string &key) {
    const json *n = find_path(root, key);
    if (!n) return {};
    if (!n->is_array()) throw InvalidConfig(key, "expected a list of [x, y] pairs");
    std::vector<Point> out;
    for (const auto &e : *n) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw InvalidConfig(key, "expected a list of [x, y] pairs");
        out.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    return out;
}

Point sample_in_disc(Rng &rng, Point center, double radius) {
    const double r = radius * std::sqrt(rng.uniform());
    const double a = 2.0 * std::numbers::pi * rng.uniform();
    return {center.x + r * std::cos(a), center.y + r * std::sin(a)};
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

} // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

ScenarioConfig ScenarioConfig::from_json(const json &j) {
    if (!j.is_object()) throw InvalidConfig("<root>", "scenario configuration must be an object");
    ScenarioConfig c;
    c.vsps = get_int(j, "vsps", c.vsps);
    c.bs_per_vsp = get_int(j, "bs_per_vsp", c.bs_per_vsp);
    c.users_per_vsp = get_int(j, "users_per_vsp", c.users_per_vsp);
    c.subchannels = get_int(j, "subchannels", c.subchannels);
    c.l_c = get_int(j, "l_c", c.l_c);

    if (const json *r = find_path(j, "reusable")) {
        if (r->is_number_integer()) {
            c.reusable_count = r->get<int>();
        } else {
            c.reusable_count.reset();
            c.reusable_list = int_list(*r, "reusable");
        }
    }
    if (const json *d = find_path(j, "dedicated")) {
        if (d->is_number_integer()) {
            c.dedicated_count = d->get<int>();
        } else {
            if (!d->is_array()) throw InvalidConfig("dedicated", "expected an integer or a list");
            c.dedicated_count.reset();
            const bool nested = !d->empty() && (*d)[0].is_array();
            if (nested) {
                for (const auto &e : *d) c.dedicated_lists.push_back(int_list(e, "dedicated"));
            } else {
                c.dedicated_lists.push_back(int_list(*d, "dedicated"));
            }
        }
    }
    if (c.reusable_count.has_value() != c.dedicated_count.has_value()) {
        // Mixed forms: an explicit list paired with a count of zero is the only accepted mix.
        if (c.reusable_count && *c.reusable_count == 0) c.reusable_count.reset();
        else if (c.dedicated_count && *c.dedicated_count == 0) c.dedicated_count.reset();
        else throw InvalidConfig("reusable/dedicated", "give both as counts or both as index lists");
    }

    c.ris_count = get_int(j, "ris.count", c.ris_count);
    if (const json *e = find_path(j, "ris.elements")) {
        c.ris_elements = e->is_number_integer() ? std::vector<int>{e->get<int>()} : int_list(*e, "ris.elements");
    }
    if (const json *o = find_path(j, "ris.owner")) {
        c.ris_owner = o->is_number_integer() ? std::vector<int>{o->get<int>()} : int_list(*o, "ris.owner");
    }

    c.radius_m = get_double(j, "geometry.radius_m", c.radius_m);
    c.separation_m = get_double(j, "geometry.separation_m", c.separation_m);
    c.ris_radius_m = get_double(j, "geometry.ris_radius_m", c.ris_radius_m);
    c.bs_positions = point_list(j, "positions.bs");
    c.user_positions = point_list(j, "positions.users");
    c.ris_positions = point_list(j, "positions.ris");

    c.prices.reused = get_double(j, "prices.reused", c.prices.reused);
    c.prices.dedicated = get_double(j, "prices.dedicated", c.prices.dedicated);
    c.prices.ris = get_double(j, "prices.ris", c.prices.ris);
    c.prices.power = get_double(j, "prices.power", c.prices.power);
    c.qos_threshold = get_double(j, "qos.threshold", c.qos_threshold);
    c.qos_penalty = get_double(j, "qos.penalty", c.qos_penalty);
    c.phi1 = get_double(j, "utility.phi1", c.phi1);
    c.phi2 = get_double(j, "utility.phi2", c.phi2);
    if (const json *b = find_path(j, "utility.beta_v")) {
        if (b->is_number()) {
            c.beta_v = {b->get<double>()};
        } else if (b->is_array()) {
            c.beta_v.clear();
            for (const auto &e : *b) {
                if (!e.is_number()) throw InvalidConfig("utility.beta_v", "expected numbers");
                c.beta_v.push_back(e.get<double>());
            }
        } else {
            throw InvalidConfig("utility.beta_v", "expected a number or a list");
        }
    }

    if (const json *m = find_path(j, "units.mode")) {
        if (!m->is_string()) throw InvalidConfig("units.mode", "expected 'normalized' or 'physical'");
        const auto s = m->get<std::string>();
        if (s == "normalized") c.units = UnitsMode::normalized;
        else if (s == "physical") c.units = UnitsMode::physical;
        else throw InvalidConfig("units.mode", "expected 'normalized' or 'physical', got '" + s + "'");
    }
    c.ref_snr_db = get_double(j, "units.ref_snr_db", c.ref_snr_db);
    c.ris_gain_ratio = get_double(j, "units.ris_gain_ratio", c.ris_gain_ratio);
    c.p_max_dbm = get_double(j, "units.p_max_dbm", c.p_max_dbm);
    c.noise_dbm_hz = get_double(j, "units.noise_dbm_hz", c.noise_dbm_hz);
    c.bandwidth_hz = get_double(j, "units.bandwidth_hz", c.bandwidth_hz);
    c.ref_gain_db = get_double(j, "units.ref_gain_db", c.ref_gain_db);
    c.pathloss_exponent = get_double(j, "channel.pathloss_exponent", c.pathloss_exponent);

    if (const json *s = find_path(j, "seed")) {
        if (!s->is_number_integer()) throw InvalidConfig("seed", "expected an integer");
        c.seed = s->get<std::uint64_t>();
    }
    return c;
}

json ScenarioConfig::to_json() const {
    json j;
    j["vsps"] = vsps;
    j["bs_per_vsp"] = bs_per_vsp;
    j["users_per_vsp"] = users_per_vsp;
    j["subchannels"] = subchannels;
    if (reusable_count) j["reusable"] = *reusable_count;
    else j["reusable"] = reusable_list;
    if (dedicated_count) j["dedicated"] = *dedicated_count;
    else j["dedicated"] = dedicated_lists;
    j["l_c"] = l_c;
    j["ris"] = {{"count", ris_count}, {"elements", ris_elements}, {"owner", ris_owner}};
    j["geometry"] = {{"radius_m", radius_m}, {"separation_m", separation_m}, {"ris_radius_m", ris_radius_m}};
    j["prices"] = {{"reused", prices.reused}, {"dedicated", prices.dedicated}, {"ris", prices.ris},
                   {"power", prices.power}};
    j["qos"] = {{"threshold", qos_threshold}, {"penalty", qos_penalty}};
    j["utility"] = {{"phi1", phi1}, {"phi2", phi2}, {"beta_v", beta_v}};
    j["units"] = {{"mode", units == UnitsMode::normalized ? "normalized" : "physical"},
                  {"ref_snr_db", ref_snr_db},
                  {"ris_gain_ratio", ris_gain_ratio},
                  {"p_max_dbm", p_max_dbm},
                  {"noise_dbm_hz", noise_dbm_hz},
                  {"bandwidth_hz", bandwidth_hz},
                  {"ref_gain_db", ref_gain_db}};
    j["channel"] = {{"pathloss_exponent", pathloss_exponent}};
    j["seed"] = seed;
    return j;
}

int Scenario::total_ris_elements() const {
    int n = 0;
    for (int m : elements_per_ris) n += m;
    return n;
}

int Scenario::ris_offset(int j) const {
    int n = 0;
    for (int i = 0; i < j; ++i) n += elements_per_ris[i];
    return n;
}

std::vector<int> Scenario::ris_owned_by(int v) const {
    std::vector<int> out;
    for (int j = 0; j < num_ris; ++j)
        if (ris_owner_vsp[j] == v) out.push_back(j);
    return out;
}

int RisAssociation::ris_of_user(int k) const {
    for (std::size_t j = 0; j < d.size(); ++j)
        if (d[j][k]) return static_cast<int>(j);
    return -1;
}

namespace {

void require(bool ok, const std::string &field, const std::string &reason) {
    if (!ok) throw InvalidConfig(field, reason);
}

std::vector<int> broadcast(const std::vector<int> &values, int n, const std::string &field) {
    if (values.size() == 1) return std::vector<int>(n, values[0]);
    require(static_cast<int>(values.size()) == n, field, "expected one value or one per RIS");
    return values;
}

void build_subchannels(const ScenarioConfig &c, Scenario &s) {
    const int V = c.vsps;
    s.dedicated_set.assign(V, {});
    if (c.reusable_count && c.dedicated_count) {
        const int cr = *c.reusable_count;
        const int cd = *c.dedicated_count;
        require(cr >= 0, "reusable", "must be >= 0");
        require(cd >= 0, "dedicated", "must be >= 0");
        require(cr + cd == c.subchannels, "subchannels",
                "reusable + dedicated must equal subchannels per VSP (" + std::to_string(cr) + " + " +
                    std::to_string(cd) + " != " + std::to_string(c.subchannels) + ")");
        for (int i = 0; i < cr; ++i) s.reusable_set.push_back(i);
        int next = cr;
        for (int v = 0; v < V; ++v)
            for (int i = 0; i < cd; ++i) s.dedicated_set[v].push_back(next++);
        s.num_subchannels = next;
        return;
    }

    s.reusable_set = c.reusable_list;
    if (!c.dedicated_lists.empty()) {
        require(static_cast<int>(c.dedicated_lists.size()) == V, "dedicated", "expected one index list per VSP");
        s.dedicated_set = c.dedicated_lists;
    }
    std::set<int> reusable(s.reusable_set.begin(), s.reusable_set.end());
    require(reusable.size() == s.reusable_set.size(), "reusable", "duplicate subchannel index");
    std::set<int> dedicated_all;
    for (const auto &list : s.dedicated_set) {
        for (int ch : list) {
            require(ch >= 0, "dedicated", "subchannel indices must be >= 0");
            if (reusable.count(ch)) throw OverlappingSets(ch);
            require(dedicated_all.insert(ch).second, "dedicated",
                    "subchannel " + std::to_string(ch) + " dedicated more than once");
        }
    }
    for (int ch : reusable) require(ch >= 0, "reusable", "subchannel indices must be >= 0");
    const int count = static_cast<int>(reusable.size() + dedicated_all.size());
    int max_index = -1;
    for (int ch : reusable) max_index = std::max(max_index, ch);
    for (int ch : dedicated_all) max_index = std::max(max_index, ch);
    require(max_index + 1 == count, "reusable/dedicated", "subchannel indices must cover 0..C-1 without gaps");
    s.num_subchannels = count;
}

} // namespace

Scenario build_scenario(const ScenarioConfig &c) {
    require(c.vsps >= 1, "vsps", "must be >= 1");
    require(c.bs_per_vsp >= 1, "bs_per_vsp", "must be >= 1");
    require(c.users_per_vsp >= 1, "users_per_vsp", "must be >= 1");
    require(c.subchannels >= 1, "subchannels", "must be >= 1");
    require(c.l_c >= 1, "l_c", "must be >= 1");
    require(c.ris_count >= 0, "ris.count", "must be >= 0");
    require(c.radius_m > 0.0, "geometry.radius_m", "must be > 0");
    require(c.separation_m >= 0.0, "geometry.separation_m", "must be >= 0");
    require(c.ris_radius_m >= 0.0 && c.ris_radius_m <= c.radius_m, "geometry.ris_radius_m",
            "must lie in [0, radius_m]");
    require(c.pathloss_exponent > 0.0, "channel.pathloss_exponent", "must be > 0");
    require(c.ris_gain_ratio >= 0.0, "units.ris_gain_ratio", "must be >= 0");
    require(c.qos_threshold >= 0.0, "qos.threshold", "must be >= 0");
    require(c.qos_penalty >= 0.0, "qos.penalty", "must be >= 0");
    require(c.phi1 > 0.0, "utility.phi1", "must be > 0");
    require(c.phi2 > 0.0, "utility.phi2", "must be > 0");

    Scenario s;
    s.num_vsps = c.vsps;
    s.bs_per_vsp = c.bs_per_vsp;
    s.users_per_vsp = c.users_per_vsp;
    s.max_users_per_subchannel = c.l_c;
    build_subchannels(c, s);

    s.reuse_flag.assign(s.num_subchannels, 0);
    for (int ch : s.reusable_set) s.reuse_flag[ch] = 1;
    s.accessible.resize(s.num_vsps);
    for (int v = 0; v < s.num_vsps; ++v) {
        auto &acc = s.accessible[v];
        acc = s.reusable_set;
        acc.insert(acc.end(), s.dedicated_set[v].begin(), s.dedicated_set[v].end());
        std::sort(acc.begin(), acc.end());
        require(!acc.empty(), "subchannels", "VSP " + std::to_string(v) + " has no accessible subchannel");
    }

    s.num_ris = c.ris_count;
    if (s.num_ris > 0) {
        s.elements_per_ris = broadcast(c.ris_elements, s.num_ris, "ris.elements");
        s.ris_owner_vsp = broadcast(c.ris_owner, s.num_ris, "ris.owner");
        for (int m : s.elements_per_ris) require(m >= 1, "ris.elements", "must be >= 1");
        for (int o : s.ris_owner_vsp) require(o >= 0 && o < s.num_vsps, "ris.owner", "VSP index out of range");
    }

    s.vsp_radius = c.radius_m;
    for (int v = 0; v < s.num_vsps; ++v) s.vsp_center.push_back({v * c.separation_m, 0.0});

    if (!c.bs_positions.empty()) {
        require(static_cast<int>(c.bs_positions.size()) == s.total_bs(), "positions.bs", "one position per BS");
        s.bs_pos = c.bs_positions;
    } else {
        Rng rng = Rng::substream(c.seed, {kBsPositions});
        for (int gb = 0; gb < s.total_bs(); ++gb)
            s.bs_pos.push_back(sample_in_disc(rng, s.vsp_center[s.vsp_of_bs(gb)], s.vsp_radius));
    }
    if (!c.user_positions.empty()) {
        require(static_cast<int>(c.user_positions.size()) == s.total_users(), "positions.users",
                "one position per user");
        s.user_pos = c.user_positions;
    } else {
        Rng rng = Rng::substream(c.seed, {kUserPositions});
        for (int gk = 0; gk < s.total_users(); ++gk)
            s.user_pos.push_back(sample_in_disc(rng, s.vsp_center[s.vsp_of_user(gk)], s.vsp_radius));
    }
    if (!c.ris_positions.empty()) {
        require(static_cast<int>(c.ris_positions.size()) == s.num_ris, "positions.ris", "one position per RIS");
        s.ris_pos = c.ris_positions;
    } else {
        Rng rng = Rng::substream(c.seed, {kRisPositions});
        for (int j = 0; j < s.num_ris; ++j)
            s.ris_pos.push_back(sample_in_disc(rng, s.vsp_center[s.ris_owner_vsp[j]], c.ris_radius_m));
    }

    s.units = c.units;
    s.pathloss_exponent = c.pathloss_exponent;
    const double beta = c.pathloss_exponent;
    if (c.units == UnitsMode::normalized) {
        s.p_max = 1.0;
        s.noise_power = 1.0;
        s.bandwidth = 1.0;
        // Median of |CN(0,1)|^2 is ln 2; pin the cell-edge median SNR at full power.
        s.ref_gain = db_to_linear(c.ref_snr_db) * std::pow(c.radius_m, beta) / std::numbers::ln2;
        // Per-element cascade mean power at (R/2, R/2) equals ris_gain_ratio times the
        // direct mean power at R.
        s.ris_hop_gain = c.ris_gain_ratio * std::pow(c.radius_m, beta) / std::pow(4.0, beta);
    } else {
        s.p_max = db_to_linear(c.p_max_dbm - 30.0);
        s.bandwidth = c.bandwidth_hz;
        s.noise_power = db_to_linear(c.noise_dbm_hz - 30.0) * c.bandwidth_hz;
        s.ref_gain = db_to_linear(c.ref_gain_db);
        s.ris_hop_gain = s.ref_gain;
    }

    s.prices = c.prices;
    if (c.beta_v.size() == 1) {
        s.profit_per_rate.assign(s.num_vsps, c.beta_v[0]);
    } else {
        require(static_cast<int>(c.beta_v.size()) == s.num_vsps, "utility.beta_v", "expected one value or one per VSP");
        s.profit_per_rate = c.beta_v;
    }
    for (double b : s.profit_per_rate) require(b > 0.0, "utility.beta_v", "must be > 0");
    s.phi1 = c.phi1;
    s.phi2 = c.phi2;
    s.rate_threshold.assign(s.total_users(), c.qos_threshold * s.bandwidth);
    s.qos_penalty_weight = c.qos_penalty;

    validate_scenario(s);
    return s;
}

void validate_scenario(const Scenario &s) {
    std::set<int> reusable(s.reusable_set.begin(), s.reusable_set.end());
    std::size_t dedicated_total = 0;
    for (const auto &list : s.dedicated_set) {
        for (int ch : list) {
            if (reusable.count(ch)) throw OverlappingSets(ch);
            require(ch >= 0 && ch < s.num_subchannels, "dedicated", "index out of range");
        }
        dedicated_total += list.size();
    }
    for (int ch : reusable) require(ch >= 0 && ch < s.num_subchannels, "reusable", "index out of range");
    require(static_cast<int>(reusable.size() + dedicated_total) == s.num_subchannels, "subchannels",
            "pool size must equal |reusable| + |dedicated|");
    for (int ch = 0; ch < s.num_subchannels; ++ch)
        require(s.reuse_flag[ch] == (reusable.count(ch) ? 1 : 0), "reuse_flags", "flag mismatch at subchannel " + std::to_string(ch));

    const double tol = 1e-9 * s.vsp_radius;
    for (int gb = 0; gb < s.total_bs(); ++gb)
        require(distance(s.bs_pos[gb], s.vsp_center[s.vsp_of_bs(gb)]) <= s.vsp_radius + tol, "positions.bs",
                "BS " + std::to_string(gb) + " outside its VSP disc");
    for (int gk = 0; gk < s.total_users(); ++gk)
        require(distance(s.user_pos[gk], s.vsp_center[s.vsp_of_user(gk)]) <= s.vsp_radius + tol, "positions.users",
                "user " + std::to_string(gk) + " outside its VSP disc");
    for (int j = 0; j < s.num_ris; ++j)
        require(distance(s.ris_pos[j], s.vsp_center[s.ris_owner_vsp[j]]) <= s.vsp_radius + tol, "positions.ris",
                "RIS " + std::to_string(j) + " outside its owner's disc");

    require(s.p_max > 0.0, "p_max", "must be > 0");
    require(s.noise_power > 0.0, "noise_power", "must be > 0");
    const Prices &p = s.prices;
    require(p.reused >= 0.0 && p.dedicated >= 0.0 && p.ris >= 0.0 && p.power >= 0.0, "prices", "must be >= 0");
    require(p.dedicated > p.reused, "prices.dedicated", "dedicated subchannels must be priced above reused ones");
}

RisAssociation fix_ris_association(const Scenario &s) {
    RisAssociation a;
    a.d.assign(s.num_ris, std::vector<std::uint8_t>(s.total_users(), 0));
    a.controller_bs.assign(s.num_ris, -1);
    for (int j = 0; j < s.num_ris; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (int gb = 0; gb < s.total_bs(); ++gb) {
            const double d = distance(s.ris_pos[j], s.bs_pos[gb]);
            if (d < best) {
                best = d;
                a.controller_bs[j] = gb;
            }
        }
    }
    for (int gk = 0; gk < s.total_users(); ++gk) {
        const auto owned = s.ris_owned_by(s.vsp_of_user(gk));
        int chosen = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int j : owned) {
            const double d = distance(s.ris_pos[j], s.user_pos[gk]);
            if (d < best) {
                best = d;
                chosen = j;
            }
        }
        if (chosen >= 0) a.d[chosen][gk] = 1;
    }
    return a;
}

} // namespace risshare
