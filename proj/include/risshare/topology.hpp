#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"

namespace risshare {

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point &) const = default;
};

double distance(Point a, Point b);

enum class UnitsMode { normalized, physical };

struct Prices {
    double reused = 0.2;
    double dedicated = 0.5;
    double ris = 0.3;
    double power = 0.1;
};

// Parsed scenario configuration. Counts and subchannel sets may be given in
// either count form (`reusable: 2`) or explicit index form (`reusable: [0, 1]`).
struct ScenarioConfig {
    int vsps = 2;
    int bs_per_vsp = 1;
    int users_per_vsp = 4;
    int subchannels = 4; // per VSP: reusable + own dedicated

    std::optional<int> reusable_count = 2;
    std::optional<int> dedicated_count = 2;
    std::vector<int> reusable_list;
    std::vector<std::vector<int>> dedicated_lists;

    int l_c = 2;

    int ris_count = 1;
    std::vector<int> ris_elements{8};
    std::vector<int> ris_owner{0};

    double radius_m = 500.0;
    double separation_m = 800.0;
    double ris_radius_m = 100.0; // RIS placed within this radius of its owner's centre

    std::vector<Point> bs_positions;
    std::vector<Point> user_positions;
    std::vector<Point> ris_positions;

    Prices prices;
    double qos_threshold = 0.5; // per unit bandwidth
    double qos_penalty = 50.0;
    double phi1 = 1.0;
    double phi2 = 1.0;
    std::vector<double> beta_v{1.0};

    UnitsMode units = UnitsMode::normalized;
    double ref_snr_db = 15.0;
    double ris_gain_ratio = 0.05;
    double pathloss_exponent = 2.5;

    // Physical-mode parameters.
    double p_max_dbm = 30.0;
    double noise_dbm_hz = -174.0;
    double bandwidth_hz = 5e6;
    double ref_gain_db = -30.0;

    std::uint64_t seed = 1;

    static ScenarioConfig from_json(const nlohmann::json &j);
    nlohmann::json to_json() const;
};

struct Scenario {
    int num_vsps = 0;
    int bs_per_vsp = 0;
    int users_per_vsp = 0;

    int num_subchannels = 0; // global pool size
    std::vector<int> reusable_set;
    std::vector<std::vector<int>> dedicated_set; // per VSP
    std::vector<int> reuse_flag;                 // per subchannel, 1 iff reusable
    std::vector<std::vector<int>> accessible;    // per VSP: sorted reusable ∪ own dedicated
    int max_users_per_subchannel = 0;

    int num_ris = 0;
    std::vector<int> elements_per_ris;
    std::vector<int> ris_owner_vsp;

    std::vector<Point> vsp_center;
    double vsp_radius = 0.0;
    std::vector<Point> bs_pos;   // global BS index v * bs_per_vsp + b
    std::vector<Point> user_pos; // global user index v * users_per_vsp + k
    std::vector<Point> ris_pos;

    UnitsMode units = UnitsMode::normalized;
    double p_max = 1.0;
    double noise_power = 1.0; // B_c N_0
    double bandwidth = 1.0;   // B_c used inside rate and power-cost formulas
    double pathloss_exponent = 2.5;
    double ref_gain = 1.0;     // rho_0 for direct and BS->RIS links
    double ris_hop_gain = 1.0; // reference gain of the RIS->user hop

    Prices prices;
    std::vector<double> profit_per_rate; // beta_v per VSP
    double phi1 = 1.0;
    double phi2 = 1.0;
    std::vector<double> rate_threshold; // per global user
    double qos_penalty_weight = 0.0;

    int total_bs() const { return num_vsps * bs_per_vsp; }
    int total_users() const { return num_vsps * users_per_vsp; }
    int bs_index(int v, int b) const { return v * bs_per_vsp + b; }
    int user_index(int v, int k) const { return v * users_per_vsp + k; }
    int vsp_of_user(int gk) const { return gk / users_per_vsp; }
    int vsp_of_bs(int gb) const { return gb / bs_per_vsp; }
    int total_ris_elements() const;
    int ris_offset(int j) const;
    std::vector<int> ris_owned_by(int v) const;
};

struct RisAssociation {
    // d[j][k] over global users.
    std::vector<std::vector<std::uint8_t>> d;
    std::vector<int> controller_bs;

    // Associated RIS of user k, or -1.
    int ris_of_user(int k) const;
};

Scenario build_scenario(const ScenarioConfig &config);
RisAssociation fix_ris_association(const Scenario &scenario);

// Throws InvalidConfig / OverlappingSets when a Scenario violates its invariants.
void validate_scenario(const Scenario &scenario);

} // namespace risshare
