#include <algorithm>
#include <cmath>
#include <numeric>

#include "desos/feeder.hpp"
#include "desos/rng.hpp"

namespace desos {

namespace {

// 24-hour unit shapes (peak = 1). t is the hour index 0..23.
double load_shape(int t) {
    const double evening = std::exp(-std::pow((t - 19.0) / 3.0, 2));
    const double morning = 0.45 * std::exp(-std::pow((t - 8.0) / 2.5, 2));
    const double s = 0.55 + 0.45 * std::max(evening, morning);
    return s;
}

double pv_shape(int t) {
    if (t < 6 || t > 20) return 0.0;
    return std::pow(std::max(0.0, std::cos((t - 13.0) / 7.0 * 1.5707963267948966)), 1.6);
}

double price_shape(int t) {
    // Day-ahead nodal-price pattern: midday depression, evening peak.
    return 20.0 + 32.0 * (load_shape(t) - 0.55) / 0.45 - 12.0 * pv_shape(t);
}

}  // namespace

Feeder gen_instance(const InstanceSpec& spec, std::uint64_t seed) {
    if (spec.bus_count < 2) fail(ErrorKind::validation, "gen_instance: bus count must be >= 2");
    if (spec.pv_penetration < 0.0 || spec.pv_penetration > 1.0) {
        fail(ErrorKind::validation, "gen_instance: infeasible spec, penetration must be in [0, 1]");
    }
    if (spec.horizon != 1 && spec.horizon != 24) {
        fail(ErrorKind::validation, "gen_instance: horizon must be 1 (snapshot) or 24");
    }

    Rng rng(seed);
    const int n = spec.bus_count;
    Feeder feeder;
    feeder.base_mva = 10.0;
    feeder.base_kv = 12.47;

    feeder.buses.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Bus& bus = feeder.buses[static_cast<size_t>(i)];
        bus.id = i + 1;
        bus.is_substation = (i == 0);
        bus.v_set = {1.0};
    }
    // HV/MV transformer at the substation.
    feeder.buses[0].k_tx = rng.uniform(0.001, 0.004);

    // Tree: mostly a trunk with laterals, which is the usual feeder layout.
    std::vector<int> parent(static_cast<size_t>(n), -1);
    for (int i = 1; i < n; ++i) {
        if (i == 1 || rng.uniform() < 0.55) {
            parent[static_cast<size_t>(i)] = i - 1;
        } else {
            parent[static_cast<size_t>(i)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(i)));
        }
    }

    // Peak load: total in the range of the reference systems (system base 10 MVA),
    // spread over the non-substation buses.
    const double total_load = rng.uniform(0.45, 0.85);
    std::vector<double> peak_p(static_cast<size_t>(n), 0.0);
    std::vector<double> peak_q(static_cast<size_t>(n), 0.0);
    {
        std::vector<double> w(static_cast<size_t>(n), 0.0);
        double wsum = 0.0;
        for (int i = 1; i < n; ++i) {
            w[static_cast<size_t>(i)] = rng.uniform(0.3, 1.7);
            wsum += w[static_cast<size_t>(i)];
        }
        for (int i = 1; i < n; ++i) {
            peak_p[static_cast<size_t>(i)] = total_load * w[static_cast<size_t>(i)] / wsum;
            const double pf = rng.uniform(0.90, 0.97);
            peak_q[static_cast<size_t>(i)] = peak_p[static_cast<size_t>(i)] * std::tan(std::acos(pf));
        }
    }

    // PV: about a third of the buses host a unit, capacities sum to the
    // requested penetration of peak load.
    std::vector<double> pv_cap(static_cast<size_t>(n), 0.0);
    const double pv_total = spec.pv_penetration * total_load;
    if (pv_total > 0.0) {
        const int sites = std::max(1, (n - 1) / 3);
        std::vector<int> candidates(static_cast<size_t>(n - 1));
        std::iota(candidates.begin(), candidates.end(), 1);
        for (int s = 0; s < sites; ++s) {
            const size_t pick = static_cast<size_t>(s) + static_cast<size_t>(rng.below(static_cast<std::uint64_t>(candidates.size() - static_cast<size_t>(s))));
            std::swap(candidates[static_cast<size_t>(s)], candidates[pick]);
        }
        std::vector<double> w(static_cast<size_t>(sites));
        double wsum = 0.0;
        for (int s = 0; s < sites; ++s) {
            w[static_cast<size_t>(s)] = rng.uniform(0.5, 1.5);
            wsum += w[static_cast<size_t>(s)];
        }
        for (int s = 0; s < sites; ++s) {
            pv_cap[static_cast<size_t>(candidates[static_cast<size_t>(s)])] = pv_total * w[static_cast<size_t>(s)] / wsum;
        }
    }

    // Storage: 2-4 units sized like the reference systems (converter MVA on
    // the order of the PV capacity, 2-4 hours of energy).
    int des_count = spec.des_count;
    if (des_count < 0) des_count = n < 12 ? 2 : (n < 48 ? 3 : 4);
    des_count = std::min(des_count, n - 1);
    const double des_total = std::max(pv_total, 0.08 * total_load + 0.02) * rng.uniform(0.6, 1.3);
    for (int d = 0; d < des_count; ++d) {
        DesUnit u;
        u.bus = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
        u.s_max = std::max(0.01, des_total / des_count * rng.uniform(0.75, 1.25));
        const double loss_fraction = rng.uniform(0.02, 0.05);  // losses at rated power
        const double r_eq = loss_fraction / u.s_max;
        const double batt_share = rng.uniform(0.5, 0.7);
        u.r_batt = r_eq * batt_share;
        u.r_cvt = r_eq * (1.0 - batt_share);
        const double hours = rng.uniform(2.0, 4.0);
        u.e_max = hours * u.s_max;
        u.e_min = 0.05 * u.e_max;
        u.e_surplus = 0.5 * u.e_max;
        feeder.des_units.push_back(u);
    }

    // Downstream aggregates for impedance and thermal sizing.
    std::vector<double> down_p(peak_p), down_q(peak_q), down_pv(pv_cap);
    std::vector<double> down_des(static_cast<size_t>(n), 0.0);
    for (const DesUnit& u : feeder.des_units) down_des[static_cast<size_t>(u.bus - 1)] += u.s_max;
    for (int i = n - 1; i >= 1; --i) {
        const int p = parent[static_cast<size_t>(i)];
        down_p[static_cast<size_t>(p)] += down_p[static_cast<size_t>(i)];
        down_q[static_cast<size_t>(p)] += down_q[static_cast<size_t>(i)];
        down_pv[static_cast<size_t>(p)] += down_pv[static_cast<size_t>(i)];
        down_des[static_cast<size_t>(p)] += down_des[static_cast<size_t>(i)];
    }

    std::vector<int> depth(static_cast<size_t>(n), 0);
    int max_depth = 1;
    for (int i = 1; i < n; ++i) {
        depth[static_cast<size_t>(i)] = depth[static_cast<size_t>(parent[static_cast<size_t>(i)])] + 1;
        max_depth = std::max(max_depth, depth[static_cast<size_t>(i)]);
    }

    // Impedances: allocate a voltage-drop budget along the deepest path so
    // peak-load voltages stay well inside the 0.81 pu^2 floor.
    const double drop_budget = rng.uniform(0.04, 0.08);
    for (int i = 1; i < n; ++i) {
        Branch br;
        br.from_bus = parent[static_cast<size_t>(i)] + 1;
        br.to_bus = i + 1;
        const double flow = std::max({down_p[static_cast<size_t>(i)],
                                      down_pv[static_cast<size_t>(i)] + down_des[static_cast<size_t>(i)], 0.02});
        const double per_branch = drop_budget / max_depth * rng.uniform(0.4, 1.0);
        br.r = std::max(1e-4, per_branch / (2.0 * flow));
        br.x = br.r * rng.uniform(0.6, 1.4);
        const double fwd = std::hypot(down_p[static_cast<size_t>(i)] + down_des[static_cast<size_t>(i)],
                                      down_q[static_cast<size_t>(i)]);
        const double back = down_pv[static_cast<size_t>(i)] + down_des[static_cast<size_t>(i)];
        br.s_max = 1.4 * std::max({fwd, back, 0.05});
        br.l_max = br.s_max * br.s_max / 1.0;  // v_nom = 1
        feeder.branches.push_back(br);
    }

    // Substation rating: import at peak plus storage charging, export of the
    // full PV fleet, both with margin; (12) allows export down to -0.6 R.
    const double charge = des_total;
    feeder.sub_rating = std::max(1.3 * (total_load + charge),
                                 1.3 * (pv_total + des_total) / 0.6);

    Profiles& prof = feeder.profiles;
    prof.horizon = spec.horizon;
    prof.dt = 1.0;
    prof.load_p.assign(static_cast<size_t>(n), {});
    prof.load_q.assign(static_cast<size_t>(n), {});
    prof.pv.assign(static_cast<size_t>(n), {});
    if (spec.horizon == 1) {
        for (int i = 0; i < n; ++i) {
            prof.load_p[static_cast<size_t>(i)] = {peak_p[static_cast<size_t>(i)]};
            prof.load_q[static_cast<size_t>(i)] = {peak_q[static_cast<size_t>(i)]};
            prof.pv[static_cast<size_t>(i)] = {pv_cap[static_cast<size_t>(i)]};
        }
        prof.price = {spec.price_constant};
    } else {
        for (int i = 0; i < n; ++i) {
            auto& lp = prof.load_p[static_cast<size_t>(i)];
            auto& lq = prof.load_q[static_cast<size_t>(i)];
            auto& pv = prof.pv[static_cast<size_t>(i)];
            lp.resize(24);
            lq.resize(24);
            pv.resize(24);
            for (int t = 0; t < 24; ++t) {
                lp[static_cast<size_t>(t)] = peak_p[static_cast<size_t>(i)] * load_shape(t);
                lq[static_cast<size_t>(t)] = peak_q[static_cast<size_t>(i)] * load_shape(t);
                pv[static_cast<size_t>(t)] = pv_cap[static_cast<size_t>(i)] * pv_shape(t);
            }
        }
        prof.price.resize(24);
        for (int t = 0; t < 24; ++t) prof.price[static_cast<size_t>(t)] = price_shape(t);
    }

    finalize_feeder(feeder);
    return feeder;
}

}  // namespace desos
