#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "desos/errors.hpp"

namespace desos {

// All electrical quantities are per-unit on the feeder's single system base;
// voltages are stored squared (pu^2) throughout. Conversion from physical
// units happens only at ingestion.

struct Bus {
    int id = 0;
    double v_min = 0.81;  // squared-voltage lower bound
    double v_max = 1.21;  // squared-voltage upper bound
    double v_nom = 1.0;   // nominal squared voltage
    std::vector<double> v_set{1.0};  // set point; size 1 (constant) or horizon
    double k_tx = 0.0;    // transformer loss coefficient, 0 for plain buses
    bool is_substation = false;

    double v_set_at(int t) const { return v_set.size() == 1 ? v_set[0] : v_set[t]; }
};

struct Branch {
    int from_bus = 0;  // upstream end
    int to_bus = 0;    // downstream end
    double r = 0.0;
    double x = 0.0;
    double s_max = 1.0;  // apparent-power (thermal) limit
    double l_max = 0.0;  // squared-current limit; derived as s_max^2 / v_nom(from) when absent
};

struct DesUnit {
    int bus = 0;
    double s_max = 0.0;   // converter MVA limit
    double r_batt = 0.0;  // battery internal resistance
    double r_cvt = 0.0;   // converter resistance
    double r_eq = 0.0;    // r_batt + r_cvt, derived
    double e_min = 0.0;   // stored-energy window, pu*h
    double e_max = 0.0;
    double e_surplus = 0.0;  // energy at the start of the cycle
};

struct Profiles {
    int horizon = 24;
    double dt = 1.0;  // hours
    // Dense per-bus series, indexed [bus_index][t]; zero-filled when a bus
    // has no entry in the input file.
    std::vector<std::vector<double>> load_p, load_q, pv;
    std::vector<double> price;  // $/MWh, may be negative
};

struct Feeder {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<DesUnit> des_units;
    Profiles profiles;
    double sub_rating = 1.0;  // substation MVA rating R
    double base_mva = 10.0;
    double base_kv = 12.47;
    bool default_bounds_used = false;  // voltage bounds came from defaults

    // Topology caches, filled by finalize_feeder().
    int substation = -1;                           // bus index
    std::vector<int> parent_branch;                // per bus index, -1 at root
    std::vector<std::vector<int>> child_branches;  // per bus index
    std::vector<int> bus_order;                    // root-to-leaf ordering

    int bus_index(int id) const;
    const Bus& bus_by_id(int id) const { return buses[static_cast<size_t>(bus_index(id))]; }
    int num_buses() const { return static_cast<int>(buses.size()); }
    int num_branches() const { return static_cast<int>(branches.size()); }
    int num_des() const { return static_cast<int>(des_units.size()); }
    int horizon() const { return profiles.horizon; }
};

// Structural checks; returns human-readable violations instead of throwing.
// Empty result iff the branch set forms a spanning tree rooted at the
// substation with every branch oriented parent -> child.
std::vector<std::string> validate_radial(const Feeder& feeder);

// Derives l_max / r_eq where absent, verifies every type invariant and
// builds the topology caches. Throws Error(validation) naming the violated
// invariant and entity.
void finalize_feeder(Feeder& feeder);

Feeder feeder_from_json_text(const std::string& text);
std::string feeder_to_json_text(const Feeder& feeder);

Feeder load_feeder(const std::string& path);
void save_feeder(const Feeder& feeder, const std::string& path);

// Snapshot view: profiles collapsed to a single period (stored-energy
// dynamics vanish with the horizon).
Feeder snapshot_feeder(const Feeder& feeder, int period = 0);

// Synthetic-instance generation: radial feeders with PV penetration and
// storage sizing in the ranges of the reference test systems.
struct InstanceSpec {
    int bus_count = 9;
    double pv_penetration = 0.305;  // total PV capacity / total peak load
    int horizon = 1;                // 1 = snapshot instance
    int des_count = -1;             // -1: pick from bus count
    double price_constant = -30.0;  // $/MWh, used for horizon-1 instances
};

Feeder gen_instance(const InstanceSpec& spec, std::uint64_t seed);

}  // namespace desos
