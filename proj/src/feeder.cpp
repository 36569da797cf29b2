#include "desos/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace desos {

namespace {

constexpr double kCouplingTol = 1e-9;  // |s_max^2 - l_max * v_nom| bound

std::string bus_label(int id) { return "bus " + std::to_string(id); }

std::string branch_label(const Branch& b) {
    return "branch " + std::to_string(b.from_bus) + "-" + std::to_string(b.to_bus);
}

}  // namespace

int Feeder::bus_index(int id) const {
    for (size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) return static_cast<int>(i);
    }
    fail(ErrorKind::validation, "unknown bus id " + std::to_string(id));
}

std::vector<std::string> validate_radial(const Feeder& feeder) {
    std::vector<std::string> violations;
    const int n = feeder.num_buses();
    if (n == 0) {
        violations.push_back("not radial: no buses");
        return violations;
    }

    int sub = -1;
    for (int i = 0; i < n; ++i) {
        if (feeder.buses[static_cast<size_t>(i)].is_substation) {
            if (sub >= 0) violations.push_back("multiple substations: " + bus_label(feeder.buses[static_cast<size_t>(i)].id));
            sub = i;
        }
    }
    if (sub < 0) {
        violations.push_back("no substation bus");
        return violations;
    }

    if (feeder.num_branches() != n - 1) {
        violations.push_back("not radial: " + std::to_string(feeder.num_branches()) +
                             " branches for " + std::to_string(n) + " buses");
    }

    std::unordered_map<int, int> index;
    for (int i = 0; i < n; ++i) index[feeder.buses[static_cast<size_t>(i)].id] = i;

    // Undirected reachability from the substation.
    std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n));  // (neighbor, branch)
    for (int e = 0; e < feeder.num_branches(); ++e) {
        const Branch& br = feeder.branches[static_cast<size_t>(e)];
        auto itf = index.find(br.from_bus);
        auto itt = index.find(br.to_bus);
        if (itf == index.end() || itt == index.end()) {
            violations.push_back(branch_label(br) + ": unknown endpoint");
            continue;
        }
        adj[static_cast<size_t>(itf->second)].push_back({itt->second, e});
        adj[static_cast<size_t>(itt->second)].push_back({itf->second, e});
    }

    std::vector<int> depth(static_cast<size_t>(n), -1);
    std::vector<int> stack{sub};
    depth[static_cast<size_t>(sub)] = 0;
    std::vector<char> branch_seen(static_cast<size_t>(feeder.num_branches()), 0);
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (auto [w, e] : adj[static_cast<size_t>(u)]) {
            if (depth[static_cast<size_t>(w)] >= 0) continue;
            depth[static_cast<size_t>(w)] = depth[static_cast<size_t>(u)] + 1;
            branch_seen[static_cast<size_t>(e)] = 1;
            // Orientation: the tree parent must be the branch's from side.
            if (feeder.branches[static_cast<size_t>(e)].from_bus != feeder.buses[static_cast<size_t>(u)].id) {
                const Branch& br = feeder.branches[static_cast<size_t>(e)];
                violations.push_back("orientation: branch " + std::to_string(br.from_bus) +
                                     "→" + std::to_string(br.to_bus));
            }
            stack.push_back(w);
        }
    }

    for (int i = 0; i < n; ++i) {
        if (depth[static_cast<size_t>(i)] < 0) {
            violations.push_back("disconnected: " + bus_label(feeder.buses[static_cast<size_t>(i)].id));
        }
    }
    for (int e = 0; e < feeder.num_branches(); ++e) {
        if (!branch_seen[static_cast<size_t>(e)] && depth.size() > 0) {
            const Branch& br = feeder.branches[static_cast<size_t>(e)];
            // A branch not used by the spanning search closes a cycle (or
            // hangs off a disconnected component, reported above).
            auto itf = index.find(br.from_bus);
            auto itt = index.find(br.to_bus);
            if (itf != index.end() && itt != index.end() &&
                depth[static_cast<size_t>(itf->second)] >= 0 && depth[static_cast<size_t>(itt->second)] >= 0) {
                violations.push_back("not radial: " + branch_label(br) + " closes a cycle");
            }
        }
    }
    return violations;
}

void finalize_feeder(Feeder& feeder) {
    const int n = feeder.num_buses();
    if (n < 1) fail(ErrorKind::validation, "feeder has no buses");

    std::unordered_map<int, int> index;
    for (int i = 0; i < n; ++i) {
        const Bus& bus = feeder.buses[static_cast<size_t>(i)];
        if (!index.emplace(bus.id, i).second) {
            fail(ErrorKind::validation, bus_label(bus.id) + ": duplicate id");
        }
    }

    for (const Bus& bus : feeder.buses) {
        if (!(bus.v_min > 0.0) || !(bus.v_min <= bus.v_nom) || !(bus.v_nom <= bus.v_max)) {
            fail(ErrorKind::validation,
                 bus_label(bus.id) + ": requires 0 < v_min <= v_nom <= v_max");
        }
        if (bus.v_set.empty() ||
            (bus.v_set.size() != 1 && static_cast<int>(bus.v_set.size()) != feeder.horizon())) {
            fail(ErrorKind::validation, bus_label(bus.id) + ": v_set must be constant or one value per period");
        }
        if (bus.k_tx < 0.0) fail(ErrorKind::validation, bus_label(bus.id) + ": k_tx < 0");
    }

    // Branch invariants; derive l_max from the thermal/current coupling when absent.
    for (Branch& br : feeder.branches) {
        if (br.r < 0.0 || br.x < 0.0 || br.r * br.r + br.x * br.x <= 0.0) {
            fail(ErrorKind::validation, branch_label(br) + ": requires r, x >= 0 and r^2 + x^2 > 0");
        }
        auto it = index.find(br.from_bus);
        if (it == index.end()) fail(ErrorKind::validation, branch_label(br) + ": unknown from bus");
        if (index.find(br.to_bus) == index.end()) fail(ErrorKind::validation, branch_label(br) + ": unknown to bus");
        const double v_nom = feeder.buses[static_cast<size_t>(it->second)].v_nom;
        if (br.s_max <= 0.0) fail(ErrorKind::validation, branch_label(br) + ": s_max <= 0");
        if (br.l_max <= 0.0) {
            br.l_max = br.s_max * br.s_max / v_nom;
        } else if (std::abs(br.s_max * br.s_max - br.l_max * v_nom) > kCouplingTol) {
            fail(ErrorKind::validation,
                 branch_label(br) + ": s_max^2 != l_max * v_nom (thermal/current coupling)");
        }
    }

    for (DesUnit& u : feeder.des_units) {
        if (index.find(u.bus) == index.end()) {
            fail(ErrorKind::validation, "des at " + bus_label(u.bus) + ": unknown bus");
        }
        if (!(u.r_batt > 0.0) || !(u.r_cvt > 0.0)) {
            fail(ErrorKind::validation, "des at " + bus_label(u.bus) + ": requires r_batt, r_cvt > 0");
        }
        u.r_eq = u.r_batt + u.r_cvt;
        if (!(u.e_min <= u.e_surplus && u.e_surplus <= u.e_max)) {
            fail(ErrorKind::validation,
                 "des at " + bus_label(u.bus) + ": requires e_min <= e_surplus <= e_max");
        }
        if (u.s_max <= 0.0) fail(ErrorKind::validation, "des at " + bus_label(u.bus) + ": s_max <= 0");
    }

    // Profiles: dense [bus][t] with matching lengths.
    Profiles& prof = feeder.profiles;
    if (prof.horizon < 1) fail(ErrorKind::validation, "profiles: horizon < 1");
    if (prof.dt <= 0.0) fail(ErrorKind::validation, "profiles: dt <= 0");
    auto fit_series = [&](std::vector<std::vector<double>>& series, const char* what) {
        series.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            auto& s = series[static_cast<size_t>(i)];
            if (s.empty()) s.assign(static_cast<size_t>(prof.horizon), 0.0);
            if (static_cast<int>(s.size()) != prof.horizon) {
                fail(ErrorKind::validation,
                     std::string(what) + " series at " + bus_label(feeder.buses[static_cast<size_t>(i)].id) +
                         ": length != horizon");
            }
        }
    };
    fit_series(prof.load_p, "load_p");
    fit_series(prof.load_q, "load_q");
    fit_series(prof.pv, "pv");
    for (int i = 0; i < n; ++i) {
        for (double g : prof.pv[static_cast<size_t>(i)]) {
            if (g < 0.0) fail(ErrorKind::validation, "pv series at " + bus_label(feeder.buses[static_cast<size_t>(i)].id) + ": negative output");
        }
    }
    if (prof.price.empty()) prof.price.assign(static_cast<size_t>(prof.horizon), 0.0);
    if (static_cast<int>(prof.price.size()) != prof.horizon) {
        fail(ErrorKind::validation, "price series: length != horizon");
    }

    int sub_count = 0;
    for (int i = 0; i < n; ++i) {
        if (feeder.buses[static_cast<size_t>(i)].is_substation) {
            feeder.substation = i;
            ++sub_count;
        }
    }
    if (sub_count != 1) {
        fail(ErrorKind::validation, "feeder must have exactly one substation bus, found " +
                                        std::to_string(sub_count));
    }

    const auto violations = validate_radial(feeder);
    if (!violations.empty()) {
        std::string msg = "feeder is not a radial tree:";
        for (const auto& v : violations) msg += "\n  " + v;
        fail(ErrorKind::validation, msg);
    }

    // Topology caches: parent/children per bus, root-to-leaf order.
    feeder.parent_branch.assign(static_cast<size_t>(n), -1);
    feeder.child_branches.assign(static_cast<size_t>(n), {});
    for (int e = 0; e < feeder.num_branches(); ++e) {
        const Branch& br = feeder.branches[static_cast<size_t>(e)];
        const int up = index.at(br.from_bus);
        const int dn = index.at(br.to_bus);
        feeder.child_branches[static_cast<size_t>(up)].push_back(e);
        feeder.parent_branch[static_cast<size_t>(dn)] = e;
    }
    feeder.bus_order.clear();
    feeder.bus_order.reserve(static_cast<size_t>(n));
    std::vector<int> stack{feeder.substation};
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        feeder.bus_order.push_back(u);
        for (int e : feeder.child_branches[static_cast<size_t>(u)]) {
            stack.push_back(index.at(feeder.branches[static_cast<size_t>(e)].to_bus));
        }
    }
}

namespace {

using nlohmann::ordered_json;

double num_or(const ordered_json& j, const char* key, double fallback, bool* present = nullptr) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        if (present) *present = false;
        return fallback;
    }
    if (present) *present = true;
    return it->get<double>();
}

std::vector<double> series_from(const ordered_json& j) {
    std::vector<double> out;
    if (j.is_number()) {
        out.push_back(j.get<double>());
    } else {
        for (const auto& v : j) out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

Feeder feeder_from_json_text(const std::string& text) {
    ordered_json root;
    try {
        root = ordered_json::parse(text);
    } catch (const std::exception& e) {
        fail(ErrorKind::parse, std::string("feeder parse error: ") + e.what());
    }

    Feeder feeder;
    try {
        if (root.contains("base")) {
            feeder.base_mva = num_or(root["base"], "mva", feeder.base_mva);
            feeder.base_kv = num_or(root["base"], "kv", feeder.base_kv);
        }
        feeder.sub_rating = num_or(root, "sub_rating", 1.0);

        if (!root.contains("buses") || root["buses"].empty()) {
            fail(ErrorKind::parse, "feeder parse error: missing buses[]");
        }
        for (const auto& jb : root["buses"]) {
            Bus bus;
            bus.id = jb.at("id").get<int>();
            bool has_min = false, has_max = false, has_nom = false;
            bus.v_min = num_or(jb, "v_min", 0.81, &has_min);
            bus.v_max = num_or(jb, "v_max", 1.21, &has_max);
            bus.v_nom = num_or(jb, "v_nom", 1.0, &has_nom);
            if (!(has_min && has_max && has_nom)) feeder.default_bounds_used = true;
            if (jb.contains("v_set")) {
                bus.v_set = series_from(jb["v_set"]);
            } else {
                bus.v_set = {bus.v_nom};
            }
            bus.k_tx = num_or(jb, "k_tx", 0.0);
            bus.is_substation = jb.value("is_substation", false);
            feeder.buses.push_back(std::move(bus));
        }

        for (const auto& jb : root.value("branches", ordered_json::array())) {
            Branch br;
            br.from_bus = jb.at("from").get<int>();
            br.to_bus = jb.at("to").get<int>();
            br.r = num_or(jb, "r", 0.0);
            br.x = num_or(jb, "x", 0.0);
            br.s_max = num_or(jb, "s_max", 1.0);
            br.l_max = num_or(jb, "l_max", 0.0);
            feeder.branches.push_back(br);
        }

        for (const auto& jd : root.value("des", ordered_json::array())) {
            DesUnit u;
            u.bus = jd.at("bus").get<int>();
            u.s_max = num_or(jd, "s_max", 0.0);
            u.r_batt = num_or(jd, "r_batt", 0.0);
            u.r_cvt = num_or(jd, "r_cvt", 0.0);
            u.e_min = num_or(jd, "e_min", 0.0);
            u.e_max = num_or(jd, "e_max", 0.0);
            u.e_surplus = num_or(jd, "e_surplus", 0.0);
            feeder.des_units.push_back(u);
        }

        Profiles& prof = feeder.profiles;
        if (root.contains("profiles")) {
            const auto& jp = root["profiles"];
            prof.horizon = static_cast<int>(num_or(jp, "horizon", 24.0));
            prof.dt = num_or(jp, "dt", 1.0);
            auto read_map = [&](const char* key, std::vector<std::vector<double>>& dense) {
                dense.assign(feeder.buses.size(), {});
                if (!jp.contains(key)) return;
                for (const auto& [bus_id, arr] : jp[key].items()) {
                    const int idx = feeder.bus_index(std::stoi(bus_id));
                    dense[static_cast<size_t>(idx)] = series_from(arr);
                    if (dense[static_cast<size_t>(idx)].size() == 1 && prof.horizon > 1) {
                        dense[static_cast<size_t>(idx)].assign(static_cast<size_t>(prof.horizon),
                                                               dense[static_cast<size_t>(idx)][0]);
                    }
                }
            };
            read_map("load_p", prof.load_p);
            read_map("load_q", prof.load_q);
            read_map("pv", prof.pv);
            if (jp.contains("price")) prof.price = series_from(jp["price"]);
        } else {
            prof.horizon = 1;
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::parse, std::string("feeder parse error: ") + e.what());
    }

    finalize_feeder(feeder);
    return feeder;
}

std::string feeder_to_json_text(const Feeder& feeder) {
    // Canonical key order keeps save -> load -> save byte-stable.
    ordered_json root;
    root["base"] = {{"mva", feeder.base_mva}, {"kv", feeder.base_kv}};
    root["sub_rating"] = feeder.sub_rating;

    root["buses"] = ordered_json::array();
    for (const Bus& bus : feeder.buses) {
        ordered_json jb;
        jb["id"] = bus.id;
        jb["v_min"] = bus.v_min;
        jb["v_max"] = bus.v_max;
        jb["v_nom"] = bus.v_nom;
        if (bus.v_set.size() == 1) {
            jb["v_set"] = bus.v_set[0];
        } else {
            jb["v_set"] = bus.v_set;
        }
        jb["k_tx"] = bus.k_tx;
        jb["is_substation"] = bus.is_substation;
        root["buses"].push_back(std::move(jb));
    }

    root["branches"] = ordered_json::array();
    for (const Branch& br : feeder.branches) {
        ordered_json jb;
        jb["from"] = br.from_bus;
        jb["to"] = br.to_bus;
        jb["r"] = br.r;
        jb["x"] = br.x;
        jb["s_max"] = br.s_max;
        jb["l_max"] = br.l_max;
        root["branches"].push_back(std::move(jb));
    }

    root["des"] = ordered_json::array();
    for (const DesUnit& u : feeder.des_units) {
        ordered_json jd;
        jd["bus"] = u.bus;
        jd["s_max"] = u.s_max;
        jd["r_batt"] = u.r_batt;
        jd["r_cvt"] = u.r_cvt;
        jd["e_min"] = u.e_min;
        jd["e_max"] = u.e_max;
        jd["e_surplus"] = u.e_surplus;
        root["des"].push_back(std::move(jd));
    }

    ordered_json jp;
    jp["horizon"] = feeder.profiles.horizon;
    jp["dt"] = feeder.profiles.dt;
    auto write_map = [&](const char* key, const std::vector<std::vector<double>>& dense) {
        ordered_json m = ordered_json::object();
        for (size_t i = 0; i < dense.size(); ++i) {
            bool all_zero = true;
            for (double v : dense[i]) all_zero = all_zero && v == 0.0;
            if (all_zero) continue;
            m[std::to_string(feeder.buses[i].id)] = dense[i];
        }
        jp[key] = std::move(m);
    };
    write_map("load_p", feeder.profiles.load_p);
    write_map("load_q", feeder.profiles.load_q);
    write_map("pv", feeder.profiles.pv);
    jp["price"] = feeder.profiles.price;
    root["profiles"] = std::move(jp);

    return root.dump(2) + "\n";
}

Feeder snapshot_feeder(const Feeder& feeder, int period) {
    if (period < 0 || period >= feeder.horizon()) {
        fail(ErrorKind::validation, "snapshot period out of range");
    }
    Feeder out = feeder;
    const size_t t = static_cast<size_t>(period);
    out.profiles.horizon = 1;
    for (auto* series : {&out.profiles.load_p, &out.profiles.load_q, &out.profiles.pv}) {
        for (auto& row : *series) row = {row[t]};
    }
    out.profiles.price = {feeder.profiles.price[t]};
    for (Bus& bus : out.buses) {
        bus.v_set = {bus.v_set_at(period)};
    }
    return out;
}

Feeder load_feeder(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open feeder file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return feeder_from_json_text(buf.str());
}

void save_feeder(const Feeder& feeder, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write feeder file: " + path);
    out << feeder_to_json_text(feeder);
}

}  // namespace desos
